import init, { pde_profile, minimize, coupled_maximizers } from "./pkg/parisi_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, fn) {
  const out = $(id);
  out.classList.remove("err");
  out.textContent = "working…";
  // let the browser paint before the synchronous wasm call
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const value = JSON.parse(fn());
      out.textContent = JSON.stringify(value, null, 2) + `\n(${(performance.now() - t0).toFixed(0)} ms)`;
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  }, 10);
}

function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all), hi = Math.max(...all);
  const sx = (x) => ((x - xs[0]) / (xs[xs.length - 1] - xs[0])) * (w - 20) + 10;
  const sy = (y) => h - 10 - ((y - lo) / (hi - lo || 1)) * (h - 20);
  series.forEach(({ values, color, name }, k) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    values.forEach((y, i) => (i ? ctx.lineTo(sx(xs[i]), sy(y)) : ctx.moveTo(sx(xs[i]), sy(y))));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(name, 14, 16 + 14 * k);
  });
}

$("p-run").onclick = () => {
  const out = $("p-out");
  try {
    const v = JSON.parse(pde_profile(num("p-h"), $("p-gamma").value));
    plot($("p-plot"), v.x, [
      { values: v.phi, color: "#1f77b4", name: "Phi" },
      { values: v.phi_x, color: "#d62728", name: "Phi_x" },
      { values: v.phi_xx, color: "#2ca02c", name: "Phi_xx" },
    ]);
    out.classList.remove("err");
    out.textContent = `Phi(0, h) = ${v.phi_at_h}`;
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
};

$("m-run").onclick = () => show("m-out", () => minimize(num("m-h"), num("m-k")));

$("c-run").onclick = () =>
  show("c-out", () => coupled_maximizers(num("c-n"), num("c-t"), num("c-h"), num("c-seed")));

init().then(() => {
  $("status").textContent = "ready";
  $("p-run").click();
});
