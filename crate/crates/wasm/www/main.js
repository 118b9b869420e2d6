import init, { bounds_curves, unchoke_pattern, completion_trace } from "./pkg/swarmloc_wasm.js";

const $ = (id) => document.getElementById(id);

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function line(ctx, xs, ys, color, sx, sy) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function bind(ids, fn) {
  for (const id of ids) {
    const el = $(id);
    const out = $(id + "-v");
    el.addEventListener("input", () => {
      if (out) out.value = el.value;
      fn();
    });
    if (out) out.value = el.value;
  }
}

function drawBounds() {
  const n = +$("b-n").value, w = +$("b-w").value, k = +$("b-k").value;
  const canvas = $("b-canvas"), ctx = canvas.getContext("2d");
  const pad = 30;
  axes(ctx, canvas.width, canvas.height, pad);
  try {
    const t = bounds_curves(n, w, k);
    $("b-err").textContent = "";
    const rows = t.length / 5;
    const xs = Array.from({ length: rows }, (_, i) => t[5 * i]);
    const sx = (x) => pad + ((x - 1) / Math.max(n - 1, 1)) * (canvas.width - 2 * pad);
    const sy = (y) => canvas.height - pad - y * (canvas.height - 2 * pad);
    const colors = ["#1f77b4", "#aec7e8", "#d62728", "#ff9896"];
    colors.forEach((c, j) => line(ctx, xs, xs.map((_, i) => t[5 * i + 1 + j]), c, sx, sy));
  } catch (e) {
    $("b-err").textContent = e.message ?? String(e);
  }
}

function drawPattern() {
  const n = +$("u-n").value, k = +$("u-k").value;
  const base = +$("u-base").value, step = +$("u-step").value;
  const canvas = $("u-canvas"), ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  try {
    const pairs = unchoke_pattern(n, base, step, k);
    $("u-err").textContent = "";
    const cell = canvas.width / n;
    ctx.fillStyle = "#333";
    for (let i = 0; i < pairs.length; i += 2) {
      const a = pairs[i], b = pairs[i + 1];
      ctx.fillRect(a * cell, canvas.height - (b + 1) * cell, cell, cell);
      ctx.fillRect(b * cell, canvas.height - (a + 1) * cell, cell, cell);
    }
  } catch (e) {
    $("u-err").textContent = e.message ?? String(e);
  }
}

function drawCompletion() {
  const n = +$("c-n").value, c = +$("c-c").value, seed = +$("c-seed").value;
  const canvas = $("c-canvas"), ctx = canvas.getContext("2d");
  const pad = 30;
  axes(ctx, canvas.width, canvas.height, pad);
  try {
    const r = completion_trace(n, 1000, 3000, c, seed);
    $("c-err").textContent = "";
    const rows = r.length / 3;
    const ts = Array.from({ length: rows }, (_, i) => r[3 * i] / 60);
    const tmax = Math.max(ts[rows - 1] ?? 1, 1);
    const sx = (x) => pad + (x / tmax) * (canvas.width - 2 * pad);
    const sy = (y) => canvas.height - pad - Math.min(y, 1.1) / 1.1 * (canvas.height - 2 * pad);
    line(ctx, ts, ts.map((_, i) => r[3 * i + 1]), "#2ca02c", sx, sy);
    line(ctx, ts, ts.map((_, i) => r[3 * i + 2] / n), "#9467bd", sx, sy);
    ctx.fillStyle = "#666";
    ctx.fillText(`${tmax.toFixed(1)} min`, canvas.width - pad - 40, canvas.height - 10);
  } catch (e) {
    $("c-err").textContent = e.message ?? String(e);
  }
}

await init();
bind(["b-n", "b-w", "b-k"], drawBounds);
bind(["u-n", "u-base", "u-step", "u-k"], drawPattern);
bind(["c-n"], () => {});
$("c-run").addEventListener("click", drawCompletion);
drawBounds();
drawPattern();
drawCompletion();
