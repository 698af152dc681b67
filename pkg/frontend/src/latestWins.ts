/**
 * Sequence-numbered dispatch that drops stale completions.
 *
 * Every dispatch gets a monotonically increasing sequence number; a result
 * is applied only if nothing newer has been applied yet, so out-of-order
 * responses can never roll the display back. Cancellation is an
 * optimization layered on top by the caller (abort signals); correctness
 * comes from the sequence check alone.
 */
export interface LatestWins<R> {
  /** Run `send`; apply its result unless a newer dispatch already landed. */
  dispatch(send: () => Promise<R>): Promise<boolean>;
  /** Highest sequence number handed out so far. */
  seq(): number;
  /** Sequence number of the last applied result (0 before the first). */
  appliedSeq(): number;
  /** Drop everything currently in flight without applying it. */
  invalidate(): void;
}

export function createLatestWins<R>(
  apply: (result: R, seq: number) => void,
  onError?: (err: unknown, seq: number, stale: boolean) => void,
): LatestWins<R> {
  let next = 0;
  let applied = 0;

  const dispatch = async (send: () => Promise<R>): Promise<boolean> => {
    const seq = ++next;
    try {
      const result = await send();
      if (seq <= applied) return false; // a newer response already landed
      applied = seq;
      apply(result, seq);
      return true;
    } catch (err) {
      // a failure is stale once any newer dispatch exists or has applied
      onError?.(err, seq, seq <= applied || seq < next);
      return false;
    }
  };

  return {
    dispatch,
    seq: () => next,
    appliedSeq: () => applied,
    invalidate: () => {
      applied = next;
    },
  };
}
