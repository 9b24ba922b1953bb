/** Minimal dependency-free canvas line charts for streaming telemetry. */

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  color: string;
  points: Point[];
  dashed?: boolean;
}

const MARGIN = { top: 10, right: 12, bottom: 22, left: 46 };

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const scaled = span / count / step;
  const unit = scaled >= 5 ? 10 : scaled >= 2 ? 5 : scaled >= 1 ? 2 : 1;
  const tick = unit * step;
  const first = Math.ceil(lo / tick) * tick;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12; v += tick) ticks.push(v);
  return ticks;
}

export class LineChart {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  render(series: Series[], yLabel = ""): void {
    const { ctx, canvas } = this;
    const width = canvas.width;
    const height = canvas.height;
    ctx.clearRect(0, 0, width, height);

    const points = series.flatMap((s) => s.points);
    if (!points.length) {
      ctx.fillStyle = "#8a93a5";
      ctx.font = "13px system-ui";
      ctx.fillText("waiting for data...", width / 2 - 50, height / 2);
      return;
    }
    let xLo = Infinity, xHi = -Infinity, yLo = Infinity, yHi = -Infinity;
    for (const p of points) {
      if (p.x < xLo) xLo = p.x;
      if (p.x > xHi) xHi = p.x;
      if (p.y < yLo) yLo = p.y;
      if (p.y > yHi) yHi = p.y;
    }
    if (xHi === xLo) xHi = xLo + 1;
    const pad = (yHi - yLo || 1) * 0.08;
    yLo -= pad;
    yHi += pad;

    const plotW = width - MARGIN.left - MARGIN.right;
    const plotH = height - MARGIN.top - MARGIN.bottom;
    const sx = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo)) * plotW;
    const sy = (y: number) => MARGIN.top + (1 - (y - yLo) / (yHi - yLo)) * plotH;

    ctx.strokeStyle = "#2c3342";
    ctx.fillStyle = "#8a93a5";
    ctx.font = "11px system-ui";
    ctx.lineWidth = 1;
    for (const tick of niceTicks(yLo, yHi)) {
      const y = sy(tick);
      ctx.beginPath();
      ctx.moveTo(MARGIN.left, y);
      ctx.lineTo(width - MARGIN.right, y);
      ctx.stroke();
      ctx.fillText(tick.toFixed(Math.abs(tick) < 10 ? 1 : 0), 4, y + 4);
    }
    for (const tick of niceTicks(xLo, xHi, 6)) {
      ctx.fillText(`${Math.round(tick)}s`, sx(tick) - 8, height - 6);
    }
    if (yLabel) ctx.fillText(yLabel, 4, 10);

    for (const s of series) {
      if (!s.points.length) continue;
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 1.6;
      ctx.setLineDash(s.dashed ? [5, 4] : []);
      ctx.beginPath();
      s.points.forEach((p, idx) => {
        if (idx === 0) ctx.moveTo(sx(p.x), sy(p.y));
        else ctx.lineTo(sx(p.x), sy(p.y));
      });
      ctx.stroke();
    }
    ctx.setLineDash([]);
  }
}

/** Tiny inline cost-history sparkline (log-free, newest at the right). */
export function renderSparkline(
  canvas: HTMLCanvasElement,
  values: number[],
  color = "#68b7ff",
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (values.length < 2) return;
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.4;
  ctx.beginPath();
  values.forEach((v, idx) => {
    const x = (idx / (values.length - 1)) * (canvas.width - 4) + 2;
    const y = canvas.height - 3 - ((v - lo) / span) * (canvas.height - 6);
    if (idx === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
