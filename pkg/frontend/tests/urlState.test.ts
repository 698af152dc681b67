import { describe, expect, it } from "vitest";

import { DEFAULT_VIEW, decodeFragment, encodeFragment, type ViewState } from "../src/urlState.js";

describe("url fragment state", () => {
  it("round-trips exactly, including awkward floats", () => {
    const state: ViewState = {
      camera: { azimuth: 2.4000000000000004, elevation: -33.333333333333336, radius: 1e-7 + 2 },
      light: { azimuth: 359.99999999999994, elevation: 12.25, radius: 4.7 },
      mask: { diffuse: true, specular: false, shadow: true, sss: false },
    };
    const restored = decodeFragment(encodeFragment(state));
    expect(restored).toEqual(state);
  });

  it("round-trips the default view", () => {
    expect(decodeFragment(encodeFragment(DEFAULT_VIEW))).toEqual(DEFAULT_VIEW);
  });

  it("tolerates a leading # and junk keys", () => {
    const frag = "#" + encodeFragment(DEFAULT_VIEW) + "&bogus=zzz";
    expect(decodeFragment(frag)).toEqual(DEFAULT_VIEW);
  });

  it("falls back per field on missing or malformed values", () => {
    const st = decodeFragment("ca=45&ce=nonsense&t=d");
    expect(st.camera.azimuth).toBe(45);
    expect(st.camera.elevation).toBe(DEFAULT_VIEW.camera.elevation);
    expect(st.camera.radius).toBe(DEFAULT_VIEW.camera.radius);
    expect(st.light).toEqual(DEFAULT_VIEW.light);
    expect(st.mask).toEqual({ diffuse: true, specular: false, shadow: false, sss: false });
  });

  it("an empty fragment returns the fallback untouched", () => {
    expect(decodeFragment("")).toEqual(DEFAULT_VIEW);
    expect(decodeFragment("#")).toEqual(DEFAULT_VIEW);
  });

  it("serializes the all-off mask distinctly from a missing mask", () => {
    const off: ViewState = { ...DEFAULT_VIEW, mask: { diffuse: false, specular: false, shadow: false, sss: false } };
    const frag = encodeFragment(off);
    expect(decodeFragment(frag).mask).toEqual(off.mask);
  });
});
