/**
 * Serialize the whole view (camera, light, term mask) into the URL fragment.
 *
 * Numbers go through String()/Number(), which round-trips every finite
 * double exactly, so a reload restores the exact view.
 */
import type { OrbitPose } from "./types.js";
import { DEFAULT_MASK, flagsToMask, maskToFlags, type TermMask } from "./terms.js";

export interface ViewState {
  camera: OrbitPose;
  light: OrbitPose;
  mask: TermMask;
}

export const DEFAULT_VIEW: ViewState = {
  camera: { azimuth: 30, elevation: 20, radius: 2.5 },
  light: { azimuth: 60, elevation: 40, radius: 4 },
  mask: { ...DEFAULT_MASK },
};

const POSE_KEYS: Array<[keyof ViewState & ("camera" | "light"), string]> = [
  ["camera", "c"],
  ["light", "l"],
];

export function encodeFragment(state: ViewState): string {
  const p = new URLSearchParams();
  for (const [field, prefix] of POSE_KEYS) {
    const pose = state[field];
    p.set(prefix + "a", String(pose.azimuth));
    p.set(prefix + "e", String(pose.elevation));
    p.set(prefix + "r", String(pose.radius));
  }
  p.set("t", maskToFlags(state.mask));
  return p.toString();
}

function readNumber(p: URLSearchParams, key: string, fallback: number): number {
  const raw = p.get(key);
  if (raw === null || raw === "") return fallback;
  const v = Number(raw);
  return Number.isFinite(v) ? v : fallback;
}

/** Tolerant decode: any missing or malformed field falls back. */
export function decodeFragment(fragment: string, fallback: ViewState = DEFAULT_VIEW): ViewState {
  const p = new URLSearchParams(fragment.replace(/^#/, ""));
  const out: ViewState = {
    camera: { ...fallback.camera },
    light: { ...fallback.light },
    mask: { ...fallback.mask },
  };
  for (const [field, prefix] of POSE_KEYS) {
    out[field] = {
      azimuth: readNumber(p, prefix + "a", fallback[field].azimuth),
      elevation: readNumber(p, prefix + "e", fallback[field].elevation),
      radius: readNumber(p, prefix + "r", fallback[field].radius),
    };
  }
  const flags = p.get("t");
  if (flags !== null) out.mask = flagsToMask(flags);
  return out;
}
