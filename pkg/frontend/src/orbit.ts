/**
 * Spherical orbit state shared by the camera and the light widget.
 *
 * Angles are kept in degrees and mutated in dyadic increments (the default
 * drag rate is 0.25 deg/px, an exact binary fraction), so wrapping by 360
 * is exact in floating point: a full-circle drag lands on bit-identical
 * request parameters.
 */
import type { OrbitPose } from "./types.js";

export interface OrbitLimits {
  minElevation?: number;
  maxElevation?: number;
  minRadius?: number;
  maxRadius?: number;
  /** Degrees of rotation per pixel of drag. Keep it a binary fraction. */
  degPerPixel?: number;
}

/** Normalize an angle to [0, 360). Exact for values within a few turns. */
export function wrapAzimuth(deg: number): number {
  let a = deg;
  // repeated exact subtraction instead of fmod keeps dyadic angles dyadic
  while (a >= 360) a -= 360;
  while (a < 0) a += 360;
  return a;
}

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

export interface OrbitState {
  pose(): OrbitPose;
  /** Apply a drag in pixels; returns false when the pose did not change. */
  drag(dx: number, dy: number): boolean;
  /** Multiply the radius by `factor`; returns false when clamped to no-op. */
  zoom(factor: number): boolean;
  set(pose: Partial<OrbitPose>): void;
}

export function createOrbitState(initial: OrbitPose, limits: OrbitLimits = {}): OrbitState {
  const minEl = limits.minElevation ?? -89;
  const maxEl = limits.maxElevation ?? 89; // inside the service's 89.9 limit
  const minR = limits.minRadius ?? 0.3;
  const maxR = limits.maxRadius ?? 30;
  const rate = limits.degPerPixel ?? 0.25;

  let azimuth = wrapAzimuth(initial.azimuth);
  let elevation = clamp(initial.elevation, minEl, maxEl);
  let radius = clamp(initial.radius, minR, maxR);

  const pose = (): OrbitPose => ({ azimuth, elevation, radius });

  const drag = (dx: number, dy: number): boolean => {
    const az = wrapAzimuth(azimuth + dx * rate);
    const el = clamp(elevation - dy * rate, minEl, maxEl); // gimbal clamp at the poles
    if (az === azimuth && el === elevation) return false;
    azimuth = az;
    elevation = el;
    return true;
  };

  const zoom = (factor: number): boolean => {
    const r = clamp(radius * factor, minR, maxR);
    if (r === radius) return false;
    radius = r;
    return true;
  };

  const set = (p: Partial<OrbitPose>): void => {
    if (p.azimuth !== undefined) azimuth = wrapAzimuth(p.azimuth);
    if (p.elevation !== undefined) elevation = clamp(p.elevation, minEl, maxEl);
    if (p.radius !== undefined) radius = clamp(p.radius, minR, maxR);
  };

  return { pose, drag, zoom, set };
}

/** Spherical to cartesian with the same convention the service uses. */
export function lightPosition(pose: OrbitPose): [number, number, number] {
  const az = (pose.azimuth * Math.PI) / 180;
  const el = (pose.elevation * Math.PI) / 180;
  return [
    pose.radius * Math.cos(el) * Math.cos(az),
    pose.radius * Math.cos(el) * Math.sin(az),
    pose.radius * Math.sin(el),
  ];
}
