import init, { calibrate, mine, dpo_train } from "./pkg/claimpref_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

// Draw one or more series on a shared x axis; each series has its own y range.
function plot(canvas, xs, series, marker) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  ctx.font = "11px system-ui";
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(pad, pad / 2, w - 2 * pad, h - 1.5 * pad);
  ctx.fillStyle = "#666";
  ctx.fillText(x0.toFixed(2), pad, h - pad / 3);
  ctx.fillText(x1.toFixed(2), w - pad - 24, h - pad / 3);
  series.forEach((s, i) => {
    const lo = Math.min(...s.ys), hi = Math.max(...s.ys);
    const sy = (y) => h - pad - ((y - lo) / (hi - lo || 1)) * (h - 2 * pad);
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.ys.forEach((y, j) => (j ? ctx.lineTo(sx(xs[j]), sy(y)) : ctx.moveTo(sx(xs[j]), sy(y))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(`${s.name} [${lo.toFixed(3)}, ${hi.toFixed(3)}]`, pad + 6 + i * 210, pad / 2 + 14);
  });
  if (marker !== undefined) {
    ctx.strokeStyle = "#000";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(sx(marker), pad / 2);
    ctx.lineTo(sx(marker), h - pad);
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

// Run a wasm call after the status line has had a chance to repaint.
function task(prefix, fn) {
  const status = $(`${prefix}-status`);
  status.className = "status";
  status.textContent = "running…";
  setTimeout(() => {
    const t0 = performance.now();
    try {
      const note = fn();
      status.textContent = `${Math.round(performance.now() - t0)} ms` + (note ? `, ${note}` : "");
    } catch (e) {
      status.className = "status error";
      status.textContent = String(e.message ?? e);
    }
  }, 10);
}

function runCalibration() {
  task("cal", () => {
    const r = JSON.parse(calibrate(num("cal-subjects"), num("cal-lambda"), num("cal-seed")));
    const xs = r.curve.map((p) => p.bias);
    plot($("cal-plot"), xs, [
      { name: "objective", color: "#c33", ys: r.curve.map((p) => p.objective) },
      { name: "macro-F1", color: "#36c", ys: r.curve.map((p) => p.macro_f1) },
      { name: "NS recall", color: "#3a3", ys: r.curve.map((p) => p.recall_ns) },
    ], r.best_bias);
    return `best b = ${r.best_bias.toFixed(2)}, J = ${r.best_objective.toFixed(4)}`;
  });
}

function cell(tag, text) {
  const el = document.createElement(tag);
  el.textContent = text;
  return el;
}

function runMining() {
  task("mine", () => {
    const r = JSON.parse(mine(num("mine-subjects"), num("mine-bias"), num("mine-delta"), num("mine-noise"), num("mine-seed")));
    const table = $("mine-table");
    table.replaceChildren();
    const head = document.createElement("tr");
    ["strategy", "pairs", "#B chosen", "#B rejected", "Δ#B", "Δchars", "Δclaims"].forEach((h) => head.append(cell("th", h)));
    table.append(head);
    for (const s of r.strategies) {
      const d = s.diagnostics;
      const row = document.createElement("tr");
      const vals = d
        ? [d.mean_b_chosen.toFixed(2), d.mean_b_rejected.toFixed(2), d.delta_b.toFixed(2), d.delta_chars.toFixed(1), d.delta_n_used.toFixed(2)]
        : ["-", "-", "-", "-", "-"];
      [s.strategy, String(s.n_pairs), ...vals].forEach((v) => row.append(cell("td", v)));
      table.append(row);
    }
    const pair = $("mine-pair");
    pair.replaceChildren();
    if (r.example) {
      const e = r.example;
      for (const [title, text] of [[`chosen (${e.chosen_b} B)`, e.chosen], [`rejected (${e.rejected_b} B)`, e.rejected]]) {
        const div = document.createElement("div");
        div.append(cell("strong", `${e.prompt_id}: ${title}`), cell("pre", text));
        pair.append(div);
      }
    }
  });
}

function runDpo() {
  task("dpo", () => {
    const r = JSON.parse(dpo_train(num("dpo-beta"), num("dpo-lr"), num("dpo-steps"), num("dpo-seed")));
    plot($("dpo-plot"), r.trace.map((p) => p.step), [
      { name: "loss", color: "#c33", ys: r.trace.map((p) => p.loss) },
      { name: "mean margin", color: "#36c", ys: r.trace.map((p) => p.mean_margin) },
      { name: "margin > 0", color: "#3a3", ys: r.trace.map((p) => p.frac_positive) },
    ]);
  });
}

await init();
$("cal-run").onclick = runCalibration;
$("mine-run").onclick = runMining;
$("dpo-run").onclick = runDpo;
runCalibration();
runDpo();
