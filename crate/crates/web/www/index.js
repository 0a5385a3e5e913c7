import init, { thermal_frame, profile_scan, pod_curve } from "./pkg/mim_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function color(t) {
  // blue -> white -> red
  const x = Math.max(0, Math.min(1, t));
  if (x < 0.5) {
    const k = x * 2;
    return [Math.round(255 * k), Math.round(255 * k), 255];
  }
  const k = (x - 0.5) * 2;
  return [255, Math.round(255 * (1 - k)), Math.round(255 * (1 - k))];
}

function drawGrid(canvas, w, h, values, lo, hi) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(w, h);
  for (let i = 0; i < w * h; i++) {
    const [r, g, b] = color((values[i] - lo) / (hi - lo || 1));
    img.data.set([r, g, b, 255], i * 4);
  }
  const off = new OffscreenCanvas(w, h);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  // row 0 is the lowest v, so flip vertically
  ctx.save();
  ctx.scale(1, -1);
  ctx.drawImage(off, 0, -canvas.height, canvas.width, canvas.height);
  ctx.restore();
}

function guard(out, f) {
  try {
    f();
  } catch (e) {
    $(out).textContent = `error: ${e}`;
  }
}

function runThermal() {
  guard("t-out", () => {
    const v = JSON.parse(thermal_frame(num("t-delta"), num("t-radius"), num("t-standoff"), num("t-seed")));
    drawGrid($("t-canvas"), v.width, v.height, v.values, -40, 150);
    const lines = v.anomalies.map(
      (a) => `${a.classification}: ${a.pixels.length} px, peak ${a.peak_c.toFixed(1)} °C, mean Δ ${a.mean_delta_c.toFixed(1)} °C`,
    );
    $("t-out").textContent = `range ${v.min_c.toFixed(1)} to ${v.max_c.toFixed(1)} °C (scale -40 to 150)\n` +
      (lines.join("\n") || "no anomalies");
  });
}

function runProfile() {
  guard("p-out", () => {
    const v = JSON.parse(profile_scan(num("p-dia"), num("p-depth"), num("p-sigma"), num("p-seed")));
    const lo = Math.min(...v.heights_mm);
    const hi = Math.max(...v.heights_mm);
    drawGrid($("p-canvas"), v.cols, v.rows, v.heights_mm, lo, hi);
    const lines = v.detections.map(
      (d) => `${d.kind_guess}: size ${d.size_mm.toFixed(2)} mm, peak ${d.peak_residual_mm.toFixed(3)} mm, ${d.samples} samples`,
    );
    $("p-out").textContent = `${v.cols}×${v.rows} samples, heights ${lo.toFixed(3)} to ${hi.toFixed(3)} mm\n` +
      (lines.join("\n") || "nothing detected");
  });
}

function runCurve() {
  guard("c-out", () => {
    const sizes = new Float64Array($("c-sizes").value.split(",").map(Number).filter((x) => x > 0));
    const points = JSON.parse(pod_curve($("c-kind").value, sizes, num("c-trials"), num("c-standoff"), 1));
    const canvas = $("c-canvas");
    const ctx = canvas.getContext("2d");
    const pad = 30;
    const w = canvas.width - 2 * pad;
    const h = canvas.height - 2 * pad;
    const maxSize = Math.max(...points.map((p) => p.size_mm));
    const x = (s) => pad + (s / maxSize) * w;
    const y = (p) => pad + (1 - p) * h;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "#999";
    ctx.strokeRect(pad, pad, w, h);
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(pad, y(0.9));
    ctx.lineTo(pad + w, y(0.9));
    ctx.stroke();
    ctx.setLineDash([]);
    for (const [key, style] of [["rate", "#36c"], ["pod_lower_bound", "#c33"]]) {
      ctx.strokeStyle = style;
      ctx.beginPath();
      points.forEach((p, i) => {
        const v = key === "rate" ? p.k / p.n : p[key];
        i ? ctx.lineTo(x(p.size_mm), y(v)) : ctx.moveTo(x(p.size_mm), y(v));
      });
      ctx.stroke();
    }
    $("c-out").textContent = "size mm  k/n    lower bound  pass\n" + points
      .map((p) => `${p.size_mm.toFixed(2).padStart(7)}  ${`${p.k}/${p.n}`.padEnd(6)} ${p.pod_lower_bound.toFixed(4).padStart(11)}  ${p.pass}`)
      .join("\n") + "\n(blue: hit rate, red: lower bound, dashed: 0.9 target)";
  });
}

await init();
$("t-run").onclick = runThermal;
$("p-run").onclick = runProfile;
$("c-run").onclick = runCurve;
runThermal();
runProfile();
