// Odd-row offset hex geometry for rendering: pointy-top hexes, odd rows
// shifted a half-tile right, matching the engine's tile indexing
// (tile = row * width + col).

export interface PixelPoint {
  x: number;
  y: number;
}

export const SQRT3 = Math.sqrt(3);

/** Center of a tile in unscaled map units (hex size 1). */
export function tileCenter(col: number, row: number): PixelPoint {
  return {
    x: SQRT3 * (col + 0.5 * (row & 1)) + SQRT3 / 2,
    y: 1.5 * row + 1,
  };
}

export function tileToColRow(tile: number, width: number): { col: number; row: number } {
  return { col: tile % width, row: Math.floor(tile / width) };
}

/** The six corners of a pointy-top hex of size 1 around a center. */
export function hexCorners(center: PixelPoint): PixelPoint[] {
  const corners: PixelPoint[] = [];
  for (let i = 0; i < 6; i++) {
    const angle = (Math.PI / 180) * (60 * i - 30);
    corners.push({ x: center.x + Math.cos(angle), y: center.y + Math.sin(angle) });
  }
  return corners;
}

/** Inverse transform: unscaled map point -> tile id, or -1 off the map. */
export function pointToTile(x: number, y: number, width: number, height: number): number {
  // Coarse row guess, then refine by testing the nearest candidates.
  const rowGuess = Math.round((y - 1) / 1.5);
  let best = -1;
  let bestDist = Infinity;
  for (let row = rowGuess - 1; row <= rowGuess + 1; row++) {
    if (row < 0 || row >= height) continue;
    const colGuess = Math.round(x / SQRT3 - 0.5 * (row & 1) - 0.5);
    for (let col = colGuess - 1; col <= colGuess + 1; col++) {
      if (col < 0 || col >= width) continue;
      const c = tileCenter(col, row);
      const d = (c.x - x) * (c.x - x) + (c.y - y) * (c.y - y);
      if (d < bestDist) {
        bestDist = d;
        best = row * width + col;
      }
    }
  }
  return bestDist <= 1.05 ? best : -1;
}

/** Map extent in unscaled units, for camera clamping. */
export function mapExtent(width: number, height: number): PixelPoint {
  return { x: SQRT3 * (width + 0.5), y: 1.5 * height + 0.5 };
}
