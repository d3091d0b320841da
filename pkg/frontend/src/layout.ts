/**
 * Static schematic layouts per case.  Case files carry no geometry, so the
 * console ships hand-placed coordinates (unit square, y grows downward).
 */

export interface Point {
  x: number;
  y: number;
}

const IEEE30: Record<number, Point> = {
  1: { x: 0.05, y: 0.15 },
  2: { x: 0.2, y: 0.1 },
  3: { x: 0.1, y: 0.35 },
  4: { x: 0.25, y: 0.3 },
  5: { x: 0.4, y: 0.08 },
  6: { x: 0.38, y: 0.3 },
  7: { x: 0.42, y: 0.18 },
  8: { x: 0.55, y: 0.28 },
  9: { x: 0.45, y: 0.45 },
  10: { x: 0.55, y: 0.52 },
  11: { x: 0.38, y: 0.55 },
  12: { x: 0.25, y: 0.55 },
  13: { x: 0.15, y: 0.62 },
  14: { x: 0.18, y: 0.75 },
  15: { x: 0.3, y: 0.78 },
  16: { x: 0.35, y: 0.66 },
  17: { x: 0.48, y: 0.62 },
  18: { x: 0.42, y: 0.86 },
  19: { x: 0.52, y: 0.9 },
  20: { x: 0.58, y: 0.78 },
  21: { x: 0.66, y: 0.62 },
  22: { x: 0.72, y: 0.55 },
  23: { x: 0.45, y: 0.95 },
  24: { x: 0.62, y: 0.92 },
  25: { x: 0.78, y: 0.82 },
  26: { x: 0.9, y: 0.88 },
  27: { x: 0.82, y: 0.65 },
  28: { x: 0.68, y: 0.35 },
  29: { x: 0.9, y: 0.55 },
  30: { x: 0.95, y: 0.72 },
};

const LAYOUTS: Record<string, Record<number, Point>> = { ieee30: IEEE30 };

export function busPosition(caseId: string, busId: number): Point {
  const layout = LAYOUTS[caseId];
  const point = layout?.[busId];
  if (!point) throw new Error(`no layout coordinate for case ${caseId}, bus ${busId}`);
  return point;
}

export function hasLayout(caseId: string): boolean {
  return caseId in LAYOUTS;
}

export function layoutBusIds(caseId: string): number[] {
  const layout = LAYOUTS[caseId];
  if (!layout) return [];
  return Object.keys(layout).map(Number);
}
