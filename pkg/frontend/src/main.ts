/**
 * Browser wiring: DOM events in, app calls out. All interaction logic
 * lives in app.ts; this file only adapts pointers, sliders, checkboxes,
 * and the URL hash.
 *
 * The service origin defaults to the CLI's default bind address and can
 * be overridden with ?service=http://host:port.
 */
import { createApiClient } from "./api.js";
import { createRelightApp } from "./app.js";
import { TERMS } from "./terms.js";
import type { Term } from "./types.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8799";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function main(): void {
  const serviceUrl =
    new URLSearchParams(location.search).get("service") ?? DEFAULT_SERVICE;
  const api = createApiClient(serviceUrl);

  const img = byId<HTMLImageElement>("view");
  const banner = byId<HTMLDivElement>("banner");
  const status = byId<HTMLDivElement>("status");
  let objectUrl: string | null = null;

  const app = createRelightApp({
    api,
    view: {
      showImage: (blob) => {
        const next = URL.createObjectURL(blob);
        img.onload = () => {
          if (objectUrl) URL.revokeObjectURL(objectUrl);
          objectUrl = next;
        };
        img.src = next;
        img.style.visibility = "visible";
      },
      fillBackground: ([r, g, b]) => {
        img.style.visibility = "hidden";
        const css = `rgb(${Math.round(r * 255)}, ${Math.round(g * 255)}, ${Math.round(b * 255)})`;
        byId<HTMLDivElement>("viewport").style.background = css;
      },
      setBanner: (msg) => {
        banner.textContent = msg ?? "";
        banner.style.display = msg ? "block" : "none";
      },
    },
    fragment: location.hash,
    onFragment: (frag) => {
      // write without creating a history entry per drag sample
      history.replaceState(null, "", "#" + frag);
      syncControls();
    },
  });

  // pointer drags: left button orbits the camera, shift orbits the light
  const viewport = byId<HTMLDivElement>("viewport");
  let lastX = 0;
  let lastY = 0;
  let dragging: "camera" | "light" | null = null;
  viewport.addEventListener("pointerdown", (e) => {
    dragging = e.shiftKey ? "light" : "camera";
    lastX = e.clientX;
    lastY = e.clientY;
    viewport.setPointerCapture(e.pointerId);
  });
  viewport.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    const dx = e.clientX - lastX;
    const dy = e.clientY - lastY;
    lastX = e.clientX;
    lastY = e.clientY;
    if (dragging === "camera") app.dragCamera(dx, dy);
    else app.dragLight(dx, dy);
  });
  const stopDrag = (): void => {
    if (!dragging) return;
    dragging = null;
    app.endDrag();
  };
  viewport.addEventListener("pointerup", stopDrag);
  viewport.addEventListener("pointercancel", stopDrag);
  viewport.addEventListener("wheel", (e) => {
    e.preventDefault();
    app.zoomCamera(e.deltaY > 0 ? 1.125 : 1 / 1.125);
  });

  // light sliders
  const sliders: Array<[string, "azimuth" | "elevation" | "radius"]> = [
    ["light-az", "azimuth"],
    ["light-el", "elevation"],
    ["light-r", "radius"],
  ];
  for (const [id, key] of sliders) {
    byId<HTMLInputElement>(id).addEventListener("input", (e) => {
      app.setLight({ [key]: Number((e.target as HTMLInputElement).value) });
    });
  }

  // term checkboxes
  for (const term of TERMS) {
    byId<HTMLInputElement>(`term-${term}`).addEventListener("change", (e) => {
      app.setTerm(term as Term, (e.target as HTMLInputElement).checked);
    });
  }

  const syncControls = (): void => {
    const st = app.viewState();
    byId<HTMLInputElement>("light-az").value = String(st.light.azimuth);
    byId<HTMLInputElement>("light-el").value = String(st.light.elevation);
    byId<HTMLInputElement>("light-r").value = String(st.light.radius);
    for (const term of TERMS) {
      byId<HTMLInputElement>(`term-${term}`).checked = st.mask[term];
    }
  };

  byId<HTMLButtonElement>("preset-run").addEventListener("click", () => {
    if (app.presetRunning()) return;
    void app.runPreset();
  });
  byId<HTMLButtonElement>("preset-stop").addEventListener("click", () => {
    app.cancelPreset();
  });

  window.addEventListener("hashchange", () => {
    app.restore(location.hash);
    syncControls();
  });

  api
    .sceneInfo()
    .then((info) => {
      status.textContent =
        `${info.gaussian_count} gaussians, ${info.n_lobes} lobes, ` +
        `checkpoint v${info.checkpoint_version}`;
    })
    .catch(() => {
      status.textContent = `service not reachable at ${serviceUrl}`;
    });

  syncControls();
  app.refresh();
}

main();
