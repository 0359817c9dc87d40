import init, { donorScatter, blendTrend, amputePreview } from "./pkg/blendmatch_wasm_demo.js";

const $ = (id) => document.getElementById(id);

function axes(ctx, w, h, pad, xlabel, ylabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#333";
  ctx.fillText(xlabel, w / 2, h - 8);
  ctx.save();
  ctx.translate(12, h / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
}

function scale(values, lo, hi) {
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max - min || 1;
  return (v) => lo + ((v - min) / span) * (hi - lo);
}

function drawScatter() {
  const family = $("family").value;
  const blend = Number($("blend").value);
  $("blend-val").textContent = blend.toFixed(2);
  $("blend").disabled = family === "pmm";
  const canvas = $("scatter");
  const ctx = canvas.getContext("2d");
  let data;
  try {
    data = donorScatter(Number($("seed").value), family, blend, Number($("k").value), Number($("rho").value));
  } catch (e) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillText(String(e), 20, 20);
    return;
  }
  const pd = [], md = [], chosen = [];
  for (let i = 0; i < data.length; i += 4) {
    pd.push(data[i + 1]);
    md.push(data[i + 2]);
    chosen.push(data[i + 3] === 1);
  }
  const pad = 30;
  axes(ctx, canvas.width, canvas.height, pad, "predictive distance", "Mahalanobis distance");
  const sx = scale(pd, pad + 4, canvas.width - pad);
  const sy = scale(md, canvas.height - pad - 4, pad);
  pd.forEach((v, i) => {
    ctx.beginPath();
    ctx.arc(sx(v), sy(md[i]), chosen[i] ? 5 : 3, 0, 2 * Math.PI);
    if (chosen[i]) {
      ctx.fillStyle = "#c0392b";
      ctx.fill();
    } else {
      ctx.strokeStyle = "#2c3e50";
      ctx.stroke();
    }
  });
}

function runTrend() {
  $("trend-status").textContent = "running…";
  // let the status paint before the blocking call
  setTimeout(() => {
    let data;
    try {
      data = blendTrend(Number($("seed").value), Number($("nsim").value), Number($("m").value));
    } catch (e) {
      $("trend-status").textContent = String(e);
      return;
    }
    const rows = ["<tr><th>blend</th><th>coverage</th><th>se</th><th>bias</th><th>rmse</th></tr>"];
    for (let i = 0; i < data.length; i += 5) {
      const cells = [data[i].toFixed(1), data[i + 1].toFixed(3), data[i + 2].toFixed(2), data[i + 3].toFixed(2), data[i + 4].toFixed(2)];
      rows.push("<tr>" + cells.map((c) => `<td>${c}</td>`).join("") + "</tr>");
    }
    $("trend").innerHTML = rows.join("");
    $("trend-status").textContent = "";
  }, 10);
}

function drawAmpute() {
  const proportion = Number($("proportion").value);
  $("prop-val").textContent = proportion.toFixed(2);
  const canvas = $("ampute");
  const ctx = canvas.getContext("2d");
  const n = 500;
  const data = amputePreview(Number($("seed").value), n, $("mechanism").value, proportion, 0);
  const score = [], prob = [], missing = [];
  for (let i = 0; i < data.length; i += 3) {
    score.push(data[i]);
    prob.push(data[i + 1]);
    missing.push(data[i + 2] === 1);
  }
  const pad = 30;
  axes(ctx, canvas.width, canvas.height, pad, "predictor sum", "P(missing)");
  const sx = scale(score, pad + 4, canvas.width - pad);
  const sy = (p) => canvas.height - pad - p * (canvas.height - 2 * pad);
  score.forEach((v, i) => {
    ctx.fillStyle = missing[i] ? "#c0392b" : "#7f8c8d";
    ctx.fillRect(sx(v) - 2, sy(prob[i]) - 2, 4, 4);
  });
  const masked = missing.filter(Boolean).length;
  $("ampute-summary").textContent = `${masked} of ${n} outcomes masked (${(masked / n).toFixed(3)})`;
}

await init();
for (const id of ["family", "blend", "k", "rho", "seed"]) $(id).addEventListener("input", drawScatter);
for (const id of ["mechanism", "proportion", "seed"]) $(id).addEventListener("input", drawAmpute);
$("run-trend").addEventListener("click", runTrend);
drawScatter();
drawAmpute();
