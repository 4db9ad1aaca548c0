import init, { compare, perturb, pass_at_k_curve } from "./pkg/codeval_wasm.js";

const $ = (id) => document.getElementById(id);
const call = (f, ...args) => JSON.parse(f(...args));

function showError(el, v) {
  el.innerHTML = "";
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = v.error;
  el.appendChild(p);
}

function cell(tag, text, cls) {
  const c = document.createElement(tag);
  c.textContent = text;
  if (cls) c.className = cls;
  return c;
}

function runCompare() {
  const v = call(compare, $("candidate").value, $("reference").value, $("language").value);
  const out = $("compare-out");
  if (v.error) return showError(out, v), ($("heatmap").innerHTML = "");
  const t = document.createElement("table");
  t.id = "scores";
  for (const [m, s] of Object.entries(v.scores)) {
    const tr = t.insertRow();
    tr.append(cell("td", m), cell("td", s === null ? "n/a" : s.toFixed(3)));
  }
  out.replaceChildren(t);
  for (const f of v.flags) out.appendChild(cell("p", f, "off"));
  drawHeatmap(v.heatmap);
}

function drawHeatmap(h) {
  const t = document.createElement("table");
  const head = t.insertRow();
  head.appendChild(cell("th", ""));
  h.candidate_tokens.forEach((tok, j) => head.appendChild(cell("th", tok, h.candidate_mask[j] ? "col" : "col off")));
  h.cells.forEach((row, i) => {
    const tr = t.insertRow();
    tr.appendChild(cell("th", h.reference_tokens[i], h.reference_mask[i] ? "" : "off"));
    row.forEach((s, j) => {
      const td = tr.insertCell();
      // Similarity 0 is white, 1 is dark blue.
      const l = Math.round(100 - 60 * Math.max(0, s));
      td.style.background = `hsl(215, 70%, ${l}%)`;
      td.title = `${h.reference_tokens[i]} / ${h.candidate_tokens[j]}: ${s.toFixed(3)}`;
    });
  });
  $("heatmap").replaceChildren(t);
}

function runPerturb(apply) {
  const v = call(perturb, $("candidate").value, $("reference").value, $("language").value, $("transform").value);
  const out = $("perturb-out");
  if (v.error && !v.transform) return showError(out, v);
  if (!v.applied) return showError(out, { error: `not applied: ${v.error}` });
  if (apply) {
    $("candidate").value = v.candidate;
    $("reference").value = v.reference;
    runCompare();
  }
  const pair = document.createElement("div");
  pair.className = "pair";
  pair.append(cell("pre", v.candidate), cell("pre", v.reference));
  out.replaceChildren(pair);
}

function runPassk() {
  const v = call(pass_at_k_curve, Number($("n").value), Number($("c").value));
  const out = $("passk-out");
  const cv = $("passk");
  const g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  if (v.error) return showError(out, v);
  out.innerHTML = "";
  const pad = 30, w = cv.width - 2 * pad, h = cv.height - 2 * pad;
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w, h);
  g.fillStyle = "#555";
  g.fillText("1", 10, pad + 4);
  g.fillText("0", 10, pad + h + 4);
  g.fillText(`k = ${v.n}`, pad + w - 30, pad + h + 16);
  g.strokeStyle = "hsl(215, 70%, 40%)";
  g.beginPath();
  v.curve.forEach(({ k, pass }, i) => {
    const x = pad + (v.n === 1 ? w : ((k - 1) / (v.n - 1)) * w);
    const y = pad + (1 - pass) * h;
    i ? g.lineTo(x, y) : g.moveTo(x, y);
  });
  g.stroke();
  out.appendChild(cell("p", `pass@1 = ${v.curve[0].pass.toFixed(3)}`));
}

await init();
$("run-compare").onclick = runCompare;
$("run-perturb").onclick = () => runPerturb(false);
$("apply-perturb").onclick = () => runPerturb(true);
$("run-passk").onclick = runPassk;
runCompare();
runPassk();
