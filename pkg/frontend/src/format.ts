/**
 * Display-only formatting.  Raw API values are kept on the elements as
 * data attributes so every rendered number is traceable to a response
 * field without rounding loss.
 */

export function fmt(value: number, digits = 3): string {
  if (!Number.isFinite(value)) return String(value);
  return value.toFixed(digits);
}

export function fmtMw(value: number): string {
  return `${fmt(value, 1)} MW`;
}

/**
 * Monotone grayscale shade for heatmap cells: 0 maps to white, the row
 * maximum to full ink.  A zero-contrast matrix renders uniformly.
 */
export function heatShade(value: number, max: number): string {
  const t = max > 0 ? Math.min(1, Math.max(0, value / max)) : 0;
  const ink = Math.round(255 * (1 - t));
  return `rgb(${ink}, ${ink}, 255)`;
}
