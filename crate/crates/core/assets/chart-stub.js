// Minimal stand-in for the chart bundle: draws one inline SVG line chart per
// metric from the embedded payload. No network access.
(function () {
  "use strict";
  var SVG = "http://www.w3.org/2000/svg";
  var COLORS = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

  function el(name, attrs, parent) {
    var node = document.createElementNS(SVG, name);
    Object.keys(attrs).forEach(function (k) { node.setAttribute(k, attrs[k]); });
    if (parent) parent.appendChild(node);
    return node;
  }

  function draw(slot, metric, boundaries) {
    Array.prototype.slice.call(slot.querySelectorAll("svg, .legend, .empty")).forEach(function (n) { n.remove(); });
    if (metric.series.length === 0) {
      var empty = document.createElement("p");
      empty.className = "empty";
      empty.textContent = "No occurrences.";
      slot.appendChild(empty);
      return;
    }
    var w = 640, h = 240, pad = 36;
    var max = 0;
    metric.series.forEach(function (s) { s.values.forEach(function (v) { if (v > max) max = v; }); });
    if (max === 0) max = 1;
    var n = boundaries.length;
    var x = function (i) { return pad + (n > 1 ? i * (w - 2 * pad) / (n - 1) : (w - 2 * pad) / 2); };
    var y = function (v) { return h - pad - v * (h - 2 * pad) / max; };
    var svg = el("svg", { viewBox: "0 0 " + w + " " + h, role: "img" }, slot);
    el("line", { x1: pad, y1: h - pad, x2: w - pad, y2: h - pad, stroke: "#999" }, svg);
    el("line", { x1: pad, y1: pad, x2: pad, y2: h - pad, stroke: "#999" }, svg);
    el("text", { x: 4, y: pad, "font-size": 10 }, svg).textContent = String(max);
    boundaries.forEach(function (b, i) {
      if (n <= 12 || i % Math.ceil(n / 12) === 0) {
        el("text", { x: x(i), y: h - pad + 14, "font-size": 10, "text-anchor": "middle" }, svg).textContent = b;
      }
    });
    var legend = document.createElement("ul");
    legend.className = "legend";
    metric.series.forEach(function (s, k) {
      var color = COLORS[k % COLORS.length];
      var pts = s.values.map(function (v, i) { return x(i) + "," + y(v); }).join(" ");
      el("polyline", { points: pts, fill: "none", stroke: color, "stroke-width": 2 }, svg);
      s.values.forEach(function (v, i) {
        var dot = el("circle", { cx: x(i), cy: y(v), r: 3, fill: color }, svg);
        el("title", {}, dot).textContent = s.label + " @ " + boundaries[i] + ": " + v;
      });
      var item = document.createElement("li");
      item.style.color = color;
      item.textContent = s.label;
      legend.appendChild(item);
    });
    slot.appendChild(legend);
  }

  function render() {
    var data = document.getElementById("report-payload");
    var payload;
    try {
      payload = JSON.parse(data.textContent);
      if (!Array.isArray(payload.metrics) || !Array.isArray(payload.boundaries)) throw new Error("bad payload");
    } catch (e) {
      var banner = document.createElement("div");
      banner.className = "error-banner";
      banner.textContent = "Report data could not be read: " + e.message;
      document.body.insertBefore(banner, document.body.firstChild);
      return 0;
    }
    payload.metrics.forEach(function (metric, i) {
      var slot = document.getElementById("chart-" + i);
      if (slot) draw(slot, metric, payload.boundaries);
    });
    return payload.metrics.length;
  }

  window.renderReport = render;
  document.addEventListener("DOMContentLoaded", render);
})();
