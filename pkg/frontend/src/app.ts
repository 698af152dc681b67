/**
 * UI orchestrator, kept free of DOM so the interaction contracts are
 * testable: drag previews are debounced and abortable, release issues
 * exactly one full-quality request, responses apply latest-wins, failures
 * raise a banner and retry with exponential backoff, and the whole view
 * state round-trips through the URL fragment.
 *
 * Concurrency model: one shared sequence numbers every render, so a stale
 * response can never overwrite a newer one; at most one full-quality
 * request is in flight, later ones coalesce onto the live state.
 */
import type { ApiClient } from "./api.js";
import { ServiceError } from "./api.js";
import { createBackoff } from "./backoff.js";
import { createDebouncedRender } from "./debounce.js";
import { createLatestWins } from "./latestWins.js";
import { createOrbitState, lightPosition } from "./orbit.js";
import { allOff, maskToComposition, type TermMask } from "./terms.js";
import { presetTrajectory } from "./trajectory.js";
import type { RenderRequest, RenderResult, Term } from "./types.js";
import { DEFAULT_VIEW, decodeFragment, encodeFragment, type ViewState } from "./urlState.js";

export interface AppView {
  showImage(blob: Blob, seq: number): void;
  /** Local stand-in when every term is off: no render round trip. */
  fillBackground(color: [number, number, number]): void;
  setBanner(message: string | null): void;
}

export interface AppOptions {
  api: Pick<ApiClient, "render">;
  view: AppView;
  /** Initial state, e.g. location.hash; falls back per field. */
  fragment?: string;
  onFragment?: (fragment: string) => void;
  previewSize?: number;
  fullSize?: number;
  debounceMs?: number;
  backoffBaseMs?: number;
  backoffMaxMs?: number;
  background?: [number, number, number];
  srgb?: boolean;
}

export interface RelightApp {
  viewState(): ViewState;
  fragment(): string;
  restore(fragment: string): void;
  dragCamera(dx: number, dy: number): void;
  dragLight(dx: number, dy: number): void;
  endDrag(): void;
  zoomCamera(factor: number): void;
  setLight(pose: Partial<ViewState["light"]>): void;
  setCamera(pose: Partial<ViewState["camera"]>): void;
  setTerm(term: Term, on: boolean): void;
  /** Render the current state at full quality (initial paint, retries). */
  refresh(): void;
  /** Step through the preset sweep, one full render per step. */
  runPreset(): Promise<void>;
  cancelPreset(): void;
  presetRunning(): boolean;
  dispose(): void;
}

function isAbort(err: unknown): boolean {
  return err instanceof Error && err.name === "AbortError";
}

function describeError(err: unknown): string {
  if (err instanceof ServiceError) return `render failed (${err.status}): ${err.message}`;
  if (err instanceof Error) return `render service unreachable: ${err.message}`;
  return "render service unreachable";
}

export function createRelightApp(opts: AppOptions): RelightApp {
  const view = opts.view;
  const previewSize = opts.previewSize ?? 64;
  const fullSize = opts.fullSize ?? 128;
  const background = opts.background ?? ([0, 0, 0] as [number, number, number]);
  const srgb = opts.srgb ?? true;

  const init = decodeFragment(opts.fragment ?? "", DEFAULT_VIEW);
  const camera = createOrbitState(init.camera);
  const light = createOrbitState(init.light, { maxRadius: 30 });
  let mask: TermMask = { ...init.mask };

  let disposed = false;
  let dragDirty = false; // pose moved since the last full-quality render
  let fullInFlight = false;
  let fullQueued = false;
  let previewCtl: AbortController | null = null;
  let presetToken = 0;
  let presetActive = false;
  let idleWaiters: Array<() => void> = [];

  const viewState = (): ViewState => ({
    camera: camera.pose(),
    light: light.pose(),
    mask: { ...mask },
  });

  const fragment = (): string => encodeFragment(viewState());
  const publish = (): void => opts.onFragment?.(fragment());

  const lw = createLatestWins<RenderResult>(
    (result, seq) => {
      backoff.succeeded();
      view.setBanner(null);
      view.showImage(result.blob, seq);
    },
    (err, _seq, stale) => {
      if (stale || isAbort(err) || disposed) return;
      view.setBanner(describeError(err));
      backoff.failed();
    },
  );

  const backoff = createBackoff(() => refresh(), {
    baseMs: opts.backoffBaseMs,
    maxMs: opts.backoffMaxMs,
  });

  const buildRequest = (size: number): RenderRequest => ({
    camera: { orbit: camera.pose() },
    light: lightPosition(light.pose()),
    width: size,
    height: size,
    composition: maskToComposition(mask),
    srgb,
    background,
  });

  const showBackgroundOnly = (): void => {
    lw.invalidate(); // a render already in flight must not repaint over this
    previewCtl?.abort();
    backoff.succeeded();
    view.setBanner(null);
    view.fillBackground(background);
  };

  const notifyIdle = (): void => {
    if (fullInFlight || fullQueued) return;
    const waiters = idleWaiters;
    idleWaiters = [];
    for (const w of waiters) w();
  };

  const whenIdle = (): Promise<void> =>
    fullInFlight || fullQueued
      ? new Promise((resolve) => idleWaiters.push(resolve))
      : Promise.resolve();

  const issuePreview = (): void => {
    if (disposed || allOff(mask)) return;
    previewCtl?.abort();
    previewCtl = new AbortController();
    const req = buildRequest(previewSize);
    const signal = previewCtl.signal;
    void lw.dispatch(() => opts.api.render(req, signal));
  };

  const issueFull = (): void => {
    if (disposed) return;
    if (allOff(mask)) {
      showBackgroundOnly();
      return;
    }
    if (fullInFlight) {
      fullQueued = true;
      return;
    }
    fullInFlight = true;
    previewCtl?.abort(); // the full render supersedes any pending preview
    const req = buildRequest(fullSize);
    void lw.dispatch(() => opts.api.render(req)).finally(() => {
      fullInFlight = false;
      if (fullQueued && !disposed) {
        fullQueued = false;
        issueFull(); // re-reads the live state: intermediate edits coalesce
      }
      notifyIdle();
    });
  };

  const previewDebounce = createDebouncedRender(issuePreview, opts.debounceMs ?? 100);

  const drag = (target: typeof camera, dx: number, dy: number): void => {
    if (disposed) return;
    cancelPreset(); // manual interaction takes over from a replay
    if (!target.drag(dx, dy)) return; // zero drag: no request
    dragDirty = true;
    publish();
    if (!allOff(mask)) previewDebounce.request();
  };

  const endDrag = (): void => {
    previewDebounce.dispose(); // drop the pending preview, if any
    previewCtl?.abort();
    if (!dragDirty) return; // tap without movement stays idempotent
    dragDirty = false;
    issueFull();
  };

  const setTerm = (term: Term, on: boolean): void => {
    if (disposed || mask[term] === on) return;
    mask = { ...mask, [term]: on };
    publish();
    issueFull(); // handles the all-off case itself
  };

  const refresh = (): void => {
    if (disposed) return;
    issueFull();
  };

  const restore = (frag: string): void => {
    if (disposed) return;
    const st = decodeFragment(frag, viewState());
    camera.set(st.camera);
    light.set(st.light);
    mask = { ...st.mask };
    dragDirty = false;
    refresh();
  };

  const runPreset = async (): Promise<void> => {
    const token = ++presetToken;
    presetActive = true;
    try {
      for (const step of presetTrajectory()) {
        if (disposed || token !== presetToken) return;
        const target = step.target === "light" ? light : camera;
        target.set({ azimuth: target.pose().azimuth + step.deltaAzimuth });
        publish();
        issueFull();
        await whenIdle(); // strictly stepwise: one render settles per step
      }
    } finally {
      if (token === presetToken) presetActive = false;
    }
  };

  const cancelPreset = (): void => {
    presetToken += 1;
    presetActive = false;
  };

  return {
    viewState,
    fragment,
    restore,
    dragCamera: (dx, dy) => drag(camera, dx, dy),
    dragLight: (dx, dy) => drag(light, dx, dy),
    endDrag,
    zoomCamera: (factor) => {
      if (disposed || !camera.zoom(factor)) return;
      publish();
      issueFull();
    },
    setLight: (pose) => {
      if (disposed) return;
      light.set(pose);
      publish();
      issueFull();
    },
    setCamera: (pose) => {
      if (disposed) return;
      camera.set(pose);
      publish();
      issueFull();
    },
    setTerm,
    refresh,
    runPreset,
    cancelPreset,
    presetRunning: () => presetActive,
    dispose: () => {
      disposed = true;
      presetToken += 1;
      presetActive = false;
      previewDebounce.dispose();
      previewCtl?.abort();
      backoff.dispose();
      idleWaiters.splice(0).forEach((w) => w());
    },
  };
}
