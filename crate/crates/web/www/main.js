import init, { friedrichs_decay, bath_correlation, secular_curve } from "./pkg/vanhove_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function plot(canvas, series, xLabel) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);
  const pad = { l: 56, r: 12, t: 12, b: 32 };
  const xs = series.flatMap(s => s.x), ys = series.flatMap(s => s.y);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y0 = Math.min(0, ...ys), y1 = Math.max(...ys) || 1;
  const px = x => pad.l + (x - x0) / (x1 - x0 || 1) * (w - pad.l - pad.r);
  const py = y => h - pad.b - (y - y0) / (y1 - y0 || 1) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, h - pad.b);
  ctx.lineTo(w - pad.r, h - pad.b);
  ctx.stroke();
  for (let k = 0; k <= 4; k++) {
    const yv = y0 + (y1 - y0) * k / 4, xv = x0 + (x1 - x0) * k / 4;
    ctx.fillText(yv.toPrecision(3), 4, py(yv) + 4);
    ctx.fillText(xv.toPrecision(3), px(xv) - 10, h - pad.b + 14);
  }
  ctx.fillText(xLabel, w - pad.r - 40, h - 4);

  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.x.forEach((x, k) => (k ? ctx.lineTo(px(x), py(s.y[k])) : ctx.moveTo(px(x), py(s.y[k]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.label, pad.l + 10, pad.t + 14 * (i + 1));
  });
}

function report(el, checks) {
  el.innerHTML = "";
  for (const c of checks) {
    const line = document.createElement("div");
    line.textContent = `${c.passed ? "PASS" : "FAIL"} ${c.name}: ${c.detail}`;
    if (!c.passed) line.className = "fail";
    el.appendChild(line);
  }
}

function guarded(statusId, body) {
  const status = document.getElementById(statusId);
  return () => {
    status.textContent = "running...";
    status.className = "status";
    setTimeout(() => {
      try {
        body(status);
      } catch (e) {
        status.textContent = String(e.message || e);
        status.className = "status fail";
      }
    }, 20);
  };
}

const num = id => Number(document.getElementById(id).value);

function runDecay(status) {
  const lambdas = document.getElementById("lambdas").value.split(",").map(Number);
  const res = JSON.parse(friedrichs_decay(new Float64Array(lambdas), num("modes"), num("theta"), num("taumax")));
  const q = document.getElementById("quantity").value;
  const series = res.summaries.map(s => {
    const rows = res.rows.filter(r => r.lambda === s.lambda);
    return { label: `lambda = ${s.lambda}`, x: rows.map(r => r.tau), y: rows.map(r => r[q]) };
  });
  plot(document.getElementById("decay-plot"), series, "tau");
  report(status, res.checks);
}

function runCorrelation(status) {
  const res = JSON.parse(bath_correlation(num("corr-modes"), num("corr-tmax"), 401));
  const r = res.report;
  plot(document.getElementById("corr-plot"), [{ label: "|C(t)|", x: r.times, y: r.modulus }], "t");
  status.textContent =
    `recurrence time ${res.recurrence_time?.toFixed(1)}, usable window ${res.usable_time?.toFixed(1)}\n` +
    `tail max ${r.tail_max.toExponential(3)} of initial ${r.initial.toExponential(3)}`;
}

function runSecular(status) {
  const res = JSON.parse(secular_curve(num("beta"), num("beta-wrong"), num("sec-lambda")));
  plot(document.getElementById("secular-plot"), [
    { label: "wrong reference", x: res.times, y: res.s_wrong },
    { label: "correct reference", x: res.times, y: res.s_correct },
  ], "t");
  report(status, res.checks);
}

await init();
document.getElementById("run-decay").onclick = guarded("decay-status", runDecay);
document.getElementById("run-corr").onclick = guarded("corr-status", runCorrelation);
document.getElementById("run-secular").onclick = guarded("secular-status", runSecular);
guarded("secular-status", runSecular)();
