/**
 * Minimal canvas line charts: inventory against the moving share target
 * F / A_n, and the price against its running average.  No dependencies so
 * the console runs from static files next to the service.
 */

export interface Series {
  label: string;
  color: string;
  points: { x: number; y: number }[];
}

const MARGIN = { top: 12, right: 14, bottom: 24, left: 58 };

export function drawChart(canvas: HTMLCanvasElement, series: Series[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.points);
  if (all.length === 0) {
    ctx.fillStyle = "#888";
    ctx.font = "12px sans-serif";
    ctx.fillText("no data yet", 16, 24);
    return;
  }
  const xs = all.map((p) => p.x);
  const ys = all.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs, xMin + 1);
  let yMin = Math.min(...ys);
  let yMax = Math.max(...ys);
  if (yMax === yMin) {
    yMax = yMin + 1;
  }
  const pad = 0.06 * (yMax - yMin);
  yMin -= pad;
  yMax += pad;

  const px = (x: number) =>
    MARGIN.left + ((x - xMin) / (xMax - xMin)) * (w - MARGIN.left - MARGIN.right);
  const py = (y: number) =>
    h - MARGIN.bottom - ((y - yMin) / (yMax - yMin)) * (h - MARGIN.top - MARGIN.bottom);

  ctx.strokeStyle = "#ccc";
  ctx.lineWidth = 1;
  ctx.strokeRect(MARGIN.left, MARGIN.top, w - MARGIN.left - MARGIN.right,
    h - MARGIN.top - MARGIN.bottom);
  ctx.fillStyle = "#666";
  ctx.font = "10px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const y = yMin + (i / 4) * (yMax - yMin);
    ctx.fillText(formatTick(y), 4, py(y) + 3);
    ctx.strokeStyle = "#eee";
    ctx.beginPath();
    ctx.moveTo(MARGIN.left, py(y));
    ctx.lineTo(w - MARGIN.right, py(y));
    ctx.stroke();
  }
  ctx.fillText(String(Math.round(xMin)), px(xMin) - 3, h - 8);
  ctx.fillText(String(Math.round(xMax)), px(xMax) - 10, h - 8);

  let legendX = MARGIN.left + 6;
  for (const s of series) {
    if (s.points.length === 0) {
      continue;
    }
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.6;
    ctx.beginPath();
    s.points.forEach((p, i) => {
      if (i === 0) {
        ctx.moveTo(px(p.x), py(p.y));
      } else {
        ctx.lineTo(px(p.x), py(p.y));
      }
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, legendX, MARGIN.top + 10);
    legendX += ctx.measureText(s.label).width + 16;
  }
}

function formatTick(v: number): string {
  const a = Math.abs(v);
  if (a >= 1e9) return (v / 1e9).toFixed(1) + "b";
  if (a >= 1e6) return (v / 1e6).toFixed(1) + "m";
  if (a >= 1e4) return (v / 1e3).toFixed(0) + "k";
  return v.toFixed(1);
}
