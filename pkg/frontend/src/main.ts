// Single-page wiring: session lifecycle, the round form, and live rendering.
// The whole view is recoverable from the session id kept in the URL hash.

import { ApiError, ExerciseClient, type RoundResult, type SessionInfo } from "./api.js";
import { renderError, renderRound, renderTally } from "./render.js";
import { randomSetting, SETTING_ANGLES } from "./state.js";

const DEFAULT_BASE = "http://127.0.0.1:8700";

interface App {
  client: ExerciseClient;
  session: SessionInfo | null;
  inFlight: boolean;
}

function el<T extends HTMLElement = HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) {
    window.localStorage.setItem("pl-api-base", fromQuery);
    return fromQuery;
  }
  return window.localStorage.getItem("pl-api-base") ?? DEFAULT_BASE;
}

function sessionFromHash(): string | null {
  const match = /session=([^&]+)/.exec(window.location.hash);
  return match ? match[1] : null;
}

function settingOf(name: string): number {
  const checked = document.querySelector<HTMLInputElement>(
    `input[name="${name}"]:checked`,
  );
  return checked ? Number(checked.value) : 1;
}

function setSetting(name: string, value: number): void {
  const input = document.querySelector<HTMLInputElement>(
    `input[name="${name}"][value="${value}"]`,
  );
  if (input) input.checked = true;
}

function setBusy(app: App, busy: boolean): void {
  app.inFlight = busy;
  for (const id of ["play", "random-a", "random-b", "new-session"]) {
    el<HTMLButtonElement>(id).disabled = busy;
  }
}

async function refreshSummary(app: App): Promise<void> {
  if (!app.session) return;
  const summary = await app.client.getSummary(app.session.id);
  renderTally(el("tally"), summary);
}

function showSession(app: App): void {
  const box = el("session-info");
  if (!app.session) {
    box.textContent = "no session";
    return;
  }
  box.textContent =
    `session ${app.session.id} — ${app.session.lives_per_system} lives per system, ` +
    `seed ${app.session.seed}, ${app.session.rounds_played} rounds played`;
}

async function restoreOrCreate(app: App): Promise<void> {
  const existing = sessionFromHash();
  if (existing) {
    try {
      app.session = await app.client.getSession(existing);
      showSession(app);
      if (app.session.rounds_played > 0) {
        const last = await app.client.getRound(app.session.id, app.session.rounds_played - 1);
        renderRound(el("round"), last);
      }
      await refreshSummary(app);
      return;
    } catch (err) {
      renderError(el("errors"), `session ${existing} not found; create a new one`);
    }
  }
}

async function createSession(app: App): Promise<void> {
  const lives = Number(el<HTMLInputElement>("lives").value);
  const seed = Number(el<HTMLInputElement>("seed").value);
  setBusy(app, true);
  renderError(el("errors"), null);
  try {
    app.session = await app.client.createSession(lives, seed);
    window.location.hash = `session=${app.session.id}`;
    showSession(app);
    renderTally(el("tally"), await app.client.getSummary(app.session.id));
    el("round").textContent = "pick settings and play a round";
  } catch (err) {
    renderError(el("errors"), describe(err));
  } finally {
    setBusy(app, false);
  }
}

async function playRound(app: App): Promise<void> {
  if (!app.session || app.inFlight) return;
  setBusy(app, true);
  renderError(el("errors"), null);
  try {
    const result: RoundResult = await app.client.playRound(
      app.session.id, settingOf("setting-a"), settingOf("setting-b"));
    app.session.rounds_played = result.round + 1;
    showSession(app);
    renderRound(el("round"), result);
    await refreshSummary(app);
  } catch (err) {
    renderError(el("errors"), describe(err));
  } finally {
    setBusy(app, false);
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return String(err);
}

export function boot(): void {
  const app: App = { client: new ExerciseClient(baseUrl()), session: null, inFlight: false };
  el<HTMLInputElement>("api-base").value = app.client.base;
  el("api-base").addEventListener("change", () => {
    const base = el<HTMLInputElement>("api-base").value.trim() || DEFAULT_BASE;
    window.localStorage.setItem("pl-api-base", base);
    app.client = new ExerciseClient(base);
  });
  for (const [name, label] of [["setting-a", "dial-a"], ["setting-b", "dial-b"]]) {
    for (const input of document.querySelectorAll<HTMLInputElement>(`input[name="${name}"]`)) {
      input.addEventListener("change", () => {
        el(label).textContent = SETTING_ANGLES[settingOf(name)];
      });
    }
  }
  el("new-session").addEventListener("click", () => void createSession(app));
  el("play").addEventListener("click", () => void playRound(app));
  el("random-a").addEventListener("click", () => {
    setSetting("setting-a", randomSetting());
    el("dial-a").textContent = SETTING_ANGLES[settingOf("setting-a")];
  });
  el("random-b").addEventListener("click", () => {
    setSetting("setting-b", randomSetting());
    el("dial-b").textContent = SETTING_ANGLES[settingOf("setting-b")];
  });
  void restoreOrCreate(app);
}

if (typeof window !== "undefined" && typeof document !== "undefined" &&
    document.getElementById("play")) {
  boot();
}
