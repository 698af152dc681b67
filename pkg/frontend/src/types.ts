/** Shapes of the render service's documented HTTP API. */

export type Term = "diffuse" | "specular" | "shadow" | "sss";

/** Look-at-origin pose in degrees; matches the service's orbit camera. */
export interface OrbitPose {
  azimuth: number;
  elevation: number;
  radius: number;
}

export interface RenderRequest {
  camera: { orbit: OrbitPose };
  light: [number, number, number];
  width: number;
  height: number;
  /** Always sent as an explicit term list so the mask round-trips losslessly. */
  composition: Term[];
  srgb?: boolean;
  background?: [number, number, number];
  fov_deg?: number;
  shadow_on_sss?: boolean;
  debug_term?: Term;
}

export interface SceneInfo {
  gaussian_count: number;
  n_lobes: number;
  checkpoint_version: number;
  bounds: { min: number[]; max: number[] };
  compositions: Record<string, Term[]>;
  debug_terms: Term[];
  max_image_size: number;
}

export interface RenderResult {
  blob: Blob;
  renderTimeMs: number;
}
