import init, { spectrum, resonance, density } from "./pkg/fgrnls_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
let last = null;

function plot(canvas, x, series, colors) {
  const g = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 24;
  g.clearRect(0, 0, w, h);
  const all = series.flat();
  let lo = Math.min(...all), hi = Math.max(...all);
  if (hi === lo) hi = lo + 1;
  const x0 = x[0], x1 = x[x.length - 1];
  const px = (v) => pad + (w - 2 * pad) * (v - x0) / (x1 - x0);
  const py = (v) => h - pad - (h - 2 * pad) * (v - lo) / (hi - lo);
  g.strokeStyle = "#999";
  g.beginPath();
  g.moveTo(pad, py(Math.min(Math.max(0, lo), hi)));
  g.lineTo(w - pad, py(Math.min(Math.max(0, lo), hi)));
  g.stroke();
  series.forEach((s, i) => {
    g.strokeStyle = colors[i % colors.length];
    g.beginPath();
    s.forEach((v, k) => (k ? g.lineTo(px(x[k]), py(v)) : g.moveTo(px(x[k]), py(v))));
    g.stroke();
  });
  g.fillStyle = "#444";
  g.fillText(x0.toFixed(2), pad, h - 6);
  g.fillText(x1.toFixed(2), w - pad - 30, h - 6);
}

function guard(out, f) {
  out.classList.remove("err");
  try {
    f();
  } catch (e) {
    out.textContent = String(e);
    out.classList.add("err");
  }
}

function solve() {
  const out = $("sp-out");
  guard(out, () => {
    const s = JSON.parse(spectrum(num("sp-a"), num("sp-k"), num("sp-l"), parseInt($("sp-n").value)));
    last = s;
    plot($("sp-plot"), s.x, [s.potential, ...s.modes], ["#888", "#c33", "#36c", "#393", "#c90"]);
    const rows = s.lambda.map((l, j) => `lambda_${j} = ${l.toFixed(8)}` + (s.exact ? `   exact ${(s.exact[j] - s.exact[0]).toFixed(8)}` : ""));
    out.textContent = rows.join("\n") + `\nc = ${s.c.toFixed(8)}`;
  });
}

function check() {
  const out = $("rs-out");
  guard(out, () => {
    const l = new Float64Array($("rs-l").value.split(",").map((v) => parseFloat(v)));
    const r = JSON.parse(resonance(l, num("rs-c")));
    if (!r.clean) {
      out.textContent = "hypotheses fail\n" + JSON.stringify(r.violations, null, 1);
      return;
    }
    const mins = r.minimal.map((t) => `m = ${t.m}  mu = [${t.mu}]  nu = [${t.nu}]`);
    out.textContent = `N = ${r.N}, |bigM| = ${r.big_m}, |M| = ${r.minimal.length}\nshells: ${r.shells.map((w) => w.toFixed(4)).join(", ")}\n` + mins.join("\n");
  });
}

function evaluate() {
  const out = $("df-out");
  guard(out, () => {
    const d = JSON.parse(density(num("sp-a"), num("sp-k"), num("df-x"), num("df-s"), num("df-k"), num("df-w"), 60, parseInt($("sp-n").value)));
    plot($("df-plot"), d.w, [d.value], ["#c33"]);
    const k = d.value.indexOf(Math.max(...d.value));
    out.textContent = `threshold c = ${d.c.toFixed(6)}\npeak ${d.value[k].toExponential(4)} at w = ${d.w[k].toFixed(4)}`;
  });
}

await init();
$("sp-go").onclick = solve;
$("rs-go").onclick = check;
$("rs-from").onclick = () => {
  if (!last) solve();
  if (!last) return;
  $("rs-l").value = last.lambda.map((v) => v.toFixed(10)).join(", ");
  $("rs-c").value = last.c.toFixed(10);
  check();
};
$("df-go").onclick = evaluate;
solve();
check();
