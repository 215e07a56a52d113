import init, { analyze, nielsen, log_det } from "./pkg/chaintorque_web.js";

const presets = {
  rose: `graph plastic
vertex *
edge a * *
edge b * *
edge c * *
basepoint *
tree
vmap * -> *
emap a -> b
emap b -> c
emap c -> a b
invimages x1 -> x3 x1^-1
invimages x2 -> x1
invimages x3 -> x2
`,
  theta: `graph theta
vertex * v
edge a * v
edge b * v
edge c * v
basepoint *
tree a
gen x1 -> ~b
gen x2 -> c
vmap * -> *
vmap v -> v
emap a -> a
emap b -> b
emap c -> c
invimages x1 -> x1
invimages x2 -> x2
`,
};

const $ = (id) => document.getElementById(id);

function show(id, f) {
  const el = $(id);
  try {
    const v = JSON.parse(f());
    el.className = "";
    el.textContent = JSON.stringify(v, null, 2);
    return v;
  } catch (e) {
    el.className = "err";
    el.textContent = String(e);
    return null;
  }
}

function plot(sums) {
  const c = $("plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  if (!sums.length) return;
  const lo = Math.min(...sums), hi = Math.max(...sums);
  const y = (s) => c.height - 10 - ((s - lo) / (hi - lo || 1)) * (c.height - 20);
  g.beginPath();
  sums.forEach((s, k) => {
    const x = 10 + (k / Math.max(1, sums.length - 1)) * (c.width - 20);
    k ? g.lineTo(x, y(s)) : g.moveTo(x, y(s));
  });
  g.stroke();
  g.fillText(`${hi.toFixed(4)}`, 12, 12);
  g.fillText(`${lo.toFixed(4)}`, 12, c.height - 2);
}

await init();
$("gm").value = presets.rose;
$("preset").onchange = (e) => {
  $("gm").value = presets[e.target.value];
  $("v-word").value = e.target.value === "theta" ? "x1 x2 x1^-1 x2^-1" : "x1 x2";
};
$("run-analyze").onclick = () => show("out-analyze", () => analyze($("gm").value));
$("run-nielsen").onclick = () =>
  show("out-nielsen", () => nielsen($("gm").value, $("v-word").value, Number($("radius").value)));
$("run-det").onclick = () => {
  const v = show("out-det", () => log_det($("gm").value, Number($("terms").value)));
  plot(v ? v.partial_sums : []);
};
