/**
 * Coalesce bursts of render requests: while a timer is pending, further
 * request() calls are no-ops, so the callback fires at most once per
 * delay window and always reads the latest state when it runs.
 */
export interface DebouncedRender {
  request: () => void;
  /** Fire a pending request immediately (at most once). */
  flush: () => void;
  /** Drop a pending request without firing it. */
  dispose: () => void;
}

export function createDebouncedRender(requestRender: () => void, delayMs = 100): DebouncedRender {
  let timer: ReturnType<typeof setTimeout> | null = null;

  const request = (): void => {
    if (timer) return;
    timer = setTimeout(() => {
      timer = null;
      requestRender();
    }, delayMs);
  };

  const flush = (): void => {
    if (!timer) return;
    clearTimeout(timer);
    timer = null;
    requestRender();
  };

  const dispose = (): void => {
    if (timer) {
      clearTimeout(timer);
      timer = null;
    }
  };

  return { request, flush, dispose };
}
