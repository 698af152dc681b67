/**
 * Exponential retry scheduler for a flaky or unreachable service:
 * each failure doubles the delay up to a cap, any success resets it.
 * Only one retry is ever pending at a time.
 */
export interface Backoff {
  /** Record a failure and schedule `retry` (no-op if one is pending). */
  failed(): void;
  /** Record a success: reset the delay and cancel any pending retry. */
  succeeded(): void;
  pending(): boolean;
  dispose(): void;
}

export function createBackoff(
  retry: () => void,
  opts: { baseMs?: number; maxMs?: number } = {},
): Backoff {
  const baseMs = opts.baseMs ?? 500;
  const maxMs = opts.maxMs ?? 8000;
  let attempt = 0;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const failed = (): void => {
    if (timer) return;
    const delay = Math.min(maxMs, baseMs * 2 ** attempt);
    attempt += 1;
    timer = setTimeout(() => {
      timer = null;
      retry();
    }, delay);
  };

  const succeeded = (): void => {
    attempt = 0;
    if (timer) {
      clearTimeout(timer);
      timer = null;
    }
  };

  return {
    failed,
    succeeded,
    pending: () => timer !== null,
    dispose: () => {
      if (timer) clearTimeout(timer);
      timer = null;
    },
  };
}
