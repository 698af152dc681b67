/**
 * The preset relighting sweep: 480 steps alternating light and camera
 * orbits (150 light steps at 2.4 deg, 90 camera steps at 2 deg, then the
 * same two phases again), mirroring the service-side evaluation trajectory.
 * The light completes two full turns and the camera one, so the sweep
 * closes its loop.
 */

export const LIGHT_STEP_DEG = 2.4;
export const CAMERA_STEP_DEG = 2;

export interface TrajectoryStep {
  target: "light" | "camera";
  deltaAzimuth: number;
}

const PHASES: ReadonlyArray<readonly [TrajectoryStep["target"], number, number]> = [
  ["light", 150, LIGHT_STEP_DEG],
  ["camera", 90, CAMERA_STEP_DEG],
  ["light", 150, LIGHT_STEP_DEG],
  ["camera", 90, CAMERA_STEP_DEG],
];

export function presetTrajectory(): TrajectoryStep[] {
  const steps: TrajectoryStep[] = [];
  for (const [target, count, delta] of PHASES) {
    for (let i = 0; i < count; i++) steps.push({ target, deltaAzimuth: delta });
  }
  return steps;
}
