// Minimal per-agent time-series line chart on a 2D canvas.

const SERIES_COLORS = ["#e6c229", "#d94f30", "#7b52ab", "#2e9ab5",
  "#58b944", "#d767ae"];

export interface ChartLayout {
  /** Pixel coordinates per series, ready to stroke. */
  points: Array<Array<{ x: number; y: number }>>;
  yMax: number;
  yMin: number;
}

/** Pure data -> pixel layout; rendering and tests share this. */
export function layoutChart(series: number[][], width: number, height: number,
                            pad = 28): ChartLayout {
  const turns = Math.max(1, ...series.map((s) => s.length));
  let yMax = 1;
  let yMin = 0;
  for (const s of series) {
    for (const v of s) {
      if (v > yMax) yMax = v;
      if (v < yMin) yMin = v;
    }
  }
  const spanX = Math.max(1, turns - 1);
  const spanY = Math.max(1, yMax - yMin);
  const points = series.map((s) =>
    s.map((v, i) => ({
      x: pad + (i / spanX) * (width - 2 * pad),
      y: height - pad - ((v - yMin) / spanY) * (height - 2 * pad),
    })));
  return { points, yMax, yMin };
}

export function drawChart(ctx: CanvasRenderingContext2D, series: number[][],
                          width: number, height: number, label: string): void {
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, width, height);
  const layout = layoutChart(series, width, height);
  ctx.strokeStyle = "#3a3f4c";
  ctx.lineWidth = 1;
  ctx.strokeRect(28, 28, width - 56, height - 56);
  layout.points.forEach((pts, agent) => {
    if (!pts.length) return;
    ctx.strokeStyle = SERIES_COLORS[agent % SERIES_COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(pts[0].x, pts[0].y);
    for (let i = 1; i < pts.length; i++) ctx.lineTo(pts[i].x, pts[i].y);
    ctx.stroke();
  });
  ctx.fillStyle = "#d5d9e0";
  ctx.font = "13px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(`${label} (max ${layout.yMax})`, 30, 20);
}
