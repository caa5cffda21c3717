// DOM rendering for the exercise: student tokens grouped by relative world,
// pairing links, and the running tally gauge.

import type { RoundResult, Summary } from "./api.js";
import {
  buildWorldGroups,
  historyTooltip,
  pairLinks,
  tallyView,
  SETTING_ANGLES,
} from "./state.js";

const TOKEN_SIZE = 26;
const TOKEN_GAP = 8;
const COLUMN_GAP = 240;
const GROUP_GAP = 18;

function clear(el: Element): void {
  while (el.firstChild) el.removeChild(el.firstChild);
}

export function renderRound(container: HTMLElement, round: RoundResult): void {
  const doc = container.ownerDocument;
  clear(container);

  const heading = doc.createElement("div");
  heading.className = "round-heading";
  heading.textContent =
    `round ${round.round}: Alice ${SETTING_ANGLES[round.settings.a]}, ` +
    `Bob ${SETTING_ANGLES[round.settings.b]} (${round.setting_relation} settings) — ` +
    `${round.counts.same} same / ${round.counts.different} different outcome pairs`;
  container.appendChild(heading);

  const positions = new Map<string, { x: number; y: number }>();
  const columns = doc.createElement("div");
  columns.className = "world-columns";
  container.appendChild(columns);

  let maxY = 0;
  (["alice", "bob"] as const).forEach((side, column) => {
    const col = doc.createElement("div");
    col.className = `world-column side-${side}`;
    const title = doc.createElement("h3");
    title.textContent = side === "alice" ? "Alice's lives" : "Bob's lives";
    col.appendChild(title);
    let y = 0;
    for (const group of buildWorldGroups(round, side)) {
      const box = doc.createElement("div");
      box.className = "world-group";
      box.dataset.side = side;
      box.dataset.outcome = group.outcome;
      box.dataset.history = group.key;
      const label = doc.createElement("div");
      label.className = "world-label";
      label.textContent = `world |${group.outcome}⟩ — ${group.students.length} lives`;
      box.appendChild(label);
      const row = doc.createElement("div");
      row.className = "token-row";
      for (const student of group.students) {
        const token = doc.createElement("span");
        token.className = `token outcome-${group.outcome}`;
        token.dataset.side = side;
        token.dataset.index = String(student.index);
        token.textContent = String(student.index);
        token.title = historyTooltip(student.history);
        row.appendChild(token);
        positions.set(`${side}:${student.index}`, {
          x: column * COLUMN_GAP + (side === "alice" ? TOKEN_SIZE : 0),
          y: y + TOKEN_SIZE / 2,
        });
        y += TOKEN_SIZE + TOKEN_GAP;
      }
      box.appendChild(row);
      col.appendChild(box);
      y += GROUP_GAP;
    }
    maxY = Math.max(maxY, y);
    columns.appendChild(col);
  });

  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("class", "pair-links");
  svg.setAttribute("width", String(COLUMN_GAP + TOKEN_SIZE));
  svg.setAttribute("height", String(maxY));
  for (const link of pairLinks(round)) {
    if (!link.compatible) continue; // incompatible worlds are never linked
    const a = positions.get(`alice:${link.alice}`);
    const b = positions.get(`bob:${link.bob}`);
    if (!a || !b) continue;
    const line = doc.createElementNS("http://www.w3.org/2000/svg", "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("class", link.same ? "pair-line same" : "pair-line different");
    line.setAttribute("data-alice", String(link.alice));
    line.setAttribute("data-bob", String(link.bob));
    svg.appendChild(line);
  }
  columns.appendChild(svg);
}

export function renderTally(container: HTMLElement, summary: Summary): void {
  const doc = container.ownerDocument;
  clear(container);
  const view = tallyView(summary);

  const gauge = doc.createElement("div");
  gauge.className = "tally-gauge";
  const scale = (value: number) => `${(value * 100).toFixed(2)}%`;

  for (const [name, value] of [["lhv", view.lhvBound], ["quantum", view.quantum]] as const) {
    const line = doc.createElement("div");
    line.className = `reference-line ${name}`;
    line.dataset.value = String(value);
    line.style.left = scale(value);
    line.title = name === "lhv"
      ? `local-record ceiling ${value.toFixed(4)}`
      : `quantum prediction ${value.toFixed(2)}`;
    gauge.appendChild(line);
  }
  if (view.p !== null) {
    if (view.low !== null && view.high !== null) {
      const band = doc.createElement("div");
      band.className = "confidence-band";
      band.style.left = scale(Math.max(0, view.low));
      band.style.width = scale(Math.min(1, view.high) - Math.max(0, view.low));
      gauge.appendChild(band);
    }
    const needle = doc.createElement("div");
    needle.className = "needle";
    needle.dataset.value = String(view.p);
    needle.style.left = scale(view.p);
    gauge.appendChild(needle);
  }
  container.appendChild(gauge);

  const text = doc.createElement("div");
  text.className = "tally-text";
  const pTxt = view.p === null ? "—" : view.p.toFixed(4);
  const oppTxt = view.pOppositeGivenSame === null ? "—" : view.pOppositeGivenSame.toFixed(4);
  text.textContent =
    `P(same | different settings) = ${pTxt} over ${view.differentPairs} pairs · ` +
    `P(opposite | same settings) = ${oppTxt} over ${view.samePairs} pairs`;
  container.appendChild(text);

  const badge = doc.createElement("span");
  badge.className = `verdict verdict-${view.verdict.replace(/\s+/g, "-")}`;
  badge.textContent = view.verdict;
  container.appendChild(badge);
}

export function renderError(container: HTMLElement, message: string | null): void {
  clear(container);
  if (message === null) return;
  const el = container.ownerDocument.createElement("div");
  el.className = "error-box";
  el.textContent = message;
  container.appendChild(el);
}
