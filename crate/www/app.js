// Plain ES module wiring the three panels to the wasm exports. No
// framework; the SVG drawing is done by hand.

import init, { sat_check, GamePanel, embed_tree } from "./pkg/topsat_wasm.js";

const $ = (id) => document.getElementById(id);
const SVG = "http://www.w3.org/2000/svg";

function el(tag, attrs, text) {
  const node = document.createElementNS(SVG, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function clear(node) {
  while (node.firstChild) node.removeChild(node.firstChild);
}

// ---------------------------------------------------------------------------
// Satisfiability panel.

// Circular layout: robust for the small witness preorders the game
// produces, cycles included.
function drawWitness(svg, w) {
  clear(svg);
  const n = w.points.length;
  const R = Math.min(90 + 18 * n, 190);
  const cx = 280, cy = R + 45;
  svg.setAttribute("height", 2 * (R + 45));

  const defs = el("defs", {});
  const marker = el("marker", {
    id: "arrow", viewBox: "0 0 10 10", refX: 9, refY: 5,
    markerWidth: 7, markerHeight: 7, orient: "auto-start-reverse",
  });
  marker.appendChild(el("path", { d: "M 0 0 L 10 5 L 0 10 z", fill: "#888" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  const pos = new Map();
  w.points.forEach((p, k) => {
    const a = (2 * Math.PI * k) / n - Math.PI / 2;
    pos.set(p, [cx + R * Math.cos(a), cy + R * Math.sin(a)]);
  });

  for (const [a, b] of w.edges) {
    const [x1, y1] = pos.get(a), [x2, y2] = pos.get(b);
    // Stop short of the target circle so the arrowhead shows.
    const d = Math.hypot(x2 - x1, y2 - y1), t = (d - 26) / d;
    svg.appendChild(el("line", {
      x1, y1,
      x2: x1 + (x2 - x1) * t, y2: y1 + (y2 - y1) * t,
      stroke: "#888", "stroke-width": 1.4, "marker-end": "url(#arrow)",
    }));
  }

  for (const p of w.points) {
    const [x, y] = pos.get(p);
    svg.appendChild(el("circle", {
      cx: x, cy: y, r: 22,
      fill: p === w.at ? "#2a7" : "#68a",
      "fill-opacity": 0.85,
    }));
    svg.appendChild(el("text", {
      x, y: y - 2, "text-anchor": "middle", fill: "#fff", "font-size": 13,
    }, String(p)));
    const tags = (w.tags[p] || []).join(" ");
    if (tags) svg.appendChild(el("text", {
      x, y: y + 12, "text-anchor": "middle", fill: "#fff", "font-size": 10,
    }, tags));
  }
}

function wireSat() {
  $("sat-run").onclick = () => {
    const r = JSON.parse(sat_check($("sat-formula").value, $("sat-class").value));
    const verdict = $("sat-verdict"), note = $("sat-note"), svg = $("sat-svg");
    clear(svg);
    svg.setAttribute("height", 0);
    if (r.error) {
      verdict.textContent = "error";
      verdict.className = "verdict err";
      note.textContent = r.error;
      return;
    }
    verdict.className = "verdict";
    verdict.textContent = r.verdict.toUpperCase();
    if (r.witness) {
      note.textContent =
        "specialization preorder of a finite witness; an arrow w → v " +
        "puts v into every open around w. Green: a point satisfying the " +
        "formula. Core form: " + r.core;
      drawWitness(svg, r.witness);
    } else {
      note.textContent = "no model in the class. Core form: " + r.core;
    }
  };
}

// ---------------------------------------------------------------------------
// Game panel.

function wireGame() {
  const panel = new GamePanel();
  const log = (text) => {
    const li = document.createElement("li");
    li.textContent = text;
    $("game-log").appendChild(li);
    li.scrollIntoView({ block: "nearest" });
  };

  const render = () => {
    const s = JSON.parse(panel.state());
    const boards = $("game-boards"), position = $("game-position"), moves = $("game-challenges");
    boards.textContent = "";
    position.textContent = "";
    moves.textContent = "";
    if (s.error) return;
    if (!s.in_play) {
      boards.append("initial boards: ");
      s.boards.forEach((b, k) => {
        const btn = document.createElement("button");
        btn.textContent = `[${k}] ${b.join(", ")}`;
        btn.onclick = () => {
          JSON.parse(panel.begin(k));
          log(`play opened at board ${k}`);
          render();
        };
        boards.appendChild(btn);
      });
      return;
    }
    position.textContent = "position: " + s.position.join(", ");
    if (s.challenges.length === 0) {
      log("no open challenges: Eloise wins this play");
      JSON.parse(panel.state());
      moves.append("pick a board to play again");
      return;
    }
    moves.append("challenge: ");
    for (const c of s.challenges) {
      const btn = document.createElement("button");
      btn.textContent = c;
      btn.onclick = () => {
        const events = JSON.parse(panel.challenge(c));
        if (events.error) {
          log("illegal move: " + events.error);
        } else {
          for (const e of events) {
            if (e.event === "challenged") log("you challenge " + e.formula);
            if (e.event === "answered")
              log((e.fresh_point ? "Eloise moves to a fresh point: "
                                 : "Eloise stays at the current point: ") + e.label.join(", "));
            if (e.event === "stopped_at_named")
              log(`Eloise returns to named board ${e.board}; the play closes`);
            if (e.event === "stopped_replay")
              log("repeated challenge: her former answer " + e.label.join(", ") +
                  " is forced and the play stops");
          }
        }
        render();
      };
      moves.appendChild(btn);
    }
  };

  $("game-start").onclick = () => {
    clear($("game-log"));
    const r = JSON.parse(panel.start($("game-formula").value, $("game-class").value));
    const verdict = $("game-verdict");
    if (r.error) {
      verdict.textContent = "error: " + r.error;
      verdict.className = "verdict err";
      ["game-boards", "game-position", "game-challenges"].forEach((id) => ($(id).textContent = ""));
      return;
    }
    verdict.className = "verdict";
    if (r.verdict === "unsat") {
      verdict.textContent = "UNSAT: Eloise has no strategy, no game to play";
      ["game-boards", "game-position", "game-challenges"].forEach((id) => ($(id).textContent = ""));
      return;
    }
    verdict.textContent = "SAT: pick a board";
    render();
  };
}

// ---------------------------------------------------------------------------
// Embedding panel.

function drawEmbedding(svg, nodes) {
  clear(svg);
  const width = 860, row = 46, pad = 30;
  const depth = Math.max(...nodes.map((n) => n.level));
  svg.setAttribute("height", pad + row * (depth + 1) + 30);

  const xs = nodes.map((n) => n.approx);
  const lo = Math.min(...xs), hi = Math.max(...xs);
  const x = (v) => pad + ((v - lo) / (hi - lo || 1)) * (width - 2 * pad);
  const y = (lvl) => pad + row * lvl;

  // Axis at the deepest level.
  const base = y(depth) + 24;
  svg.appendChild(el("line", { x1: pad, y1: base, x2: width - pad, y2: base, stroke: "#888" }));
  for (const v of [-1, 0, 1]) {
    if (v < lo || v > hi) continue;
    svg.appendChild(el("line", { x1: x(v), y1: base - 4, x2: x(v), y2: base + 4, stroke: "#888" }));
    svg.appendChild(el("text", { x: x(v), y: base + 16, "text-anchor": "middle", "font-size": 10, fill: "#888" }, String(v)));
  }

  nodes.forEach((n, k) => {
    if (n.parent !== null) {
      const p = nodes[n.parent];
      svg.appendChild(el("line", {
        x1: x(p.approx), y1: y(p.level), x2: x(n.approx), y2: y(n.level),
        stroke: "#68a", "stroke-width": 1, "stroke-opacity": 0.6,
      }));
    }
    // Drop line onto the axis to show the linear order.
    svg.appendChild(el("line", {
      x1: x(n.approx), y1: y(n.level), x2: x(n.approx), y2: base,
      stroke: "#8883", "stroke-width": 1,
    }));
    svg.appendChild(el("circle", { cx: x(n.approx), cy: y(n.level), r: 4.5, fill: k === 0 ? "#2a7" : "#68a" }));
    const title = el("title", {});
    title.textContent = n.value;
    svg.lastChild.appendChild(title);
  });
}

function wireEmbed() {
  $("embed-run").onclick = () => {
    const r = JSON.parse(embed_tree(Number($("embed-n").value), Number($("embed-d").value)));
    if (r.error) {
      $("boot-error").textContent = r.error;
      return;
    }
    drawEmbedding($("embed-svg"), r);
  };
}

init().then(() => {
  wireSat();
  wireGame();
  wireEmbed();
  $("sat-run").click();
  $("embed-run").click();
}).catch((e) => {
  $("boot-error").textContent =
    "wasm bundle missing; build it with: wasm-pack build crates/topsat-wasm " +
    "--target web --out-dir ../../www/pkg  (" + e + ")";
});
