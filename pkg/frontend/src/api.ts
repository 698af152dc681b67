/** Thin typed client over the render service's two endpoints. */
import type { RenderRequest, RenderResult, SceneInfo } from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export interface ApiClient {
  sceneInfo(): Promise<SceneInfo>;
  render(req: RenderRequest, signal?: AbortSignal): Promise<RenderResult>;
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // non-JSON error body; fall through to the status text
  }
  return resp.statusText || `HTTP ${resp.status}`;
}

export function createApiClient(baseUrl: string, fetchFn: typeof fetch = fetch): ApiClient {
  const root = baseUrl.replace(/\/+$/, "");

  const sceneInfo = async (): Promise<SceneInfo> => {
    const resp = await fetchFn(`${root}/scene/info`);
    if (!resp.ok) throw new ServiceError(resp.status, await errorDetail(resp));
    return (await resp.json()) as SceneInfo;
  };

  const render = async (req: RenderRequest, signal?: AbortSignal): Promise<RenderResult> => {
    const resp = await fetchFn(`${root}/render`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
    if (!resp.ok) throw new ServiceError(resp.status, await errorDetail(resp));
    const blob = await resp.blob();
    const renderTimeMs = Number(resp.headers.get("X-Render-Time-Ms") ?? "0");
    return { blob, renderTimeMs };
  };

  return { sceneInfo, render };
}
