import type { RunStatus } from "./types.js";

/** Points of an SVG polyline for the accuracy history, in a w x h viewbox. */
export function sparklinePoints(
  history: number[],
  width: number,
  height: number,
): string {
  if (history.length === 0) {
    return "";
  }
  const lo = Math.min(...history);
  const hi = Math.max(...history);
  const span = hi - lo || 1;
  const step = history.length > 1 ? width / (history.length - 1) : 0;
  return history
    .map((v, i) => {
      const x = history.length > 1 ? i * step : width / 2;
      const y = height - ((v - lo) / span) * (height - 2) - 1;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

export function statusSummary(status: RunStatus): string {
  const acc =
    status.val_acc === null ? "n/a" : `${(100 * status.val_acc).toFixed(2)}%`;
  const theta = status.theta === null ? "n/a" : status.theta.toFixed(3);
  return (
    `iteration ${status.iteration}/${status.total_iterations}` +
    ` | val acc ${acc}` +
    ` | labels ${status.labels_acquired}/${status.label_budget}` +
    ` | threshold ${theta}`
  );
}
