/** Reflectance-term mask: checkbox state <-> request composition list. */
import type { Term } from "./types.js";

export const TERMS: readonly Term[] = ["diffuse", "specular", "shadow", "sss"];

export type TermMask = Record<Term, boolean>;

export const DEFAULT_MASK: TermMask = {
  diffuse: true,
  specular: true,
  shadow: true,
  sss: true,
};

/** Canonical term order so equal masks serialize to equal request bodies. */
export function maskToComposition(mask: TermMask): Term[] {
  return TERMS.filter((t) => mask[t]);
}

export function compositionToMask(terms: readonly Term[]): TermMask {
  const mask = { diffuse: false, specular: false, shadow: false, sss: false };
  for (const t of terms) mask[t] = true;
  return mask;
}

export function allOff(mask: TermMask): boolean {
  return TERMS.every((t) => !mask[t]);
}

// one letter per term for the URL fragment; sss gets "x" to avoid
// colliding with specular
const FLAG: Record<Term, string> = { diffuse: "d", specular: "s", shadow: "h", sss: "x" };

export function maskToFlags(mask: TermMask): string {
  return TERMS.filter((t) => mask[t]).map((t) => FLAG[t]).join("");
}

export function flagsToMask(flags: string): TermMask {
  const mask = { diffuse: false, specular: false, shadow: false, sss: false };
  for (const t of TERMS) if (flags.includes(FLAG[t])) mask[t] = true;
  return mask;
}
