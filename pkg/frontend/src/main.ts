// Page wiring: connect, keyboard teleop, tuning panel, live charts.

import { StripChart, renderCharts } from "./charts.js";
import { Frame } from "./protocol.js";
import { RobotView } from "./robotview.js";
import { CommandReply, SessionClient } from "./session.js";
import { Teleop } from "./teleop.js";
import { TuningPanel } from "./tuning.js";
import { WebSocketTransport, wsUrl } from "./transport.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el as T;
};

const urlInput = $<HTMLInputElement>("server-url");
urlInput.value = wsUrl(window.location.origin);

let session: SessionClient | null = null;
const teleop = new Teleop();
let tuning: TuningPanel | null = null;
let windowSeconds = 10;

const statusBadge = $("status");
const banner = $("banner");
const lampBox = $("lamps");
const countersBox = $("counters");
const gainsBox = $<HTMLDivElement>("gain-sliders");
const ackGains = $("ack-gains");
const pendingNote = $("pending-note");
const errorNote = $("tuning-error");
const eventLog = $("event-log");

const charts = [
  new StripChart($<HTMLCanvasElement>("chart-theta"), [
    { label: "theta", color: "#62d0a6", pick: (f) => (f.theta * 180) / Math.PI },
    { label: "theta_est", color: "#d0b562", pick: (f) => (f.thetaEst * 180) / Math.PI },
  ], "deg"),
  new StripChart($<HTMLCanvasElement>("chart-p"), [
    { label: "p", color: "#6fa8ff", pick: (f) => f.p },
  ], "m"),
  new StripChart($<HTMLCanvasElement>("chart-u"), [
    { label: "u", color: "#c792ea", pick: (f) => f.u },
  ], "rad/s"),
  new StripChart($<HTMLCanvasElement>("chart-torque"), [
    { label: "T", color: "#ff8a65", pick: (f) => f.torque },
  ], "N.m"),
];
const robotView = new RobotView($<HTMLCanvasElement>("robot-view"));

function connect(): void {
  session?.close();
  const httpBase = urlInput.value.replace(/^ws/, "http").replace(/\/ws$/, "");
  session = new SessionClient(wsUrl(httpBase), (u) => new WebSocketTransport(u));
  tuning = new TuningPanel(
    (kind, payload) => session!.send(kind, payload) as Promise<CommandReply>,
    renderTuning,
  );
  session.onChange = () => {
    renderStatus();
    if (session!.acknowledged.gains && tuning!.acknowledged.length === 0) {
      tuning!.setAcknowledged(session!.acknowledged.gains);
      buildGainSliders();
    }
  };
  session.onEvent = (name, value) => {
    const line = document.createElement("div");
    line.textContent = `${name} -> ${value}`;
    eventLog.prepend(line);
    while (eventLog.childElementCount > 8) eventLog.lastChild?.remove();
  };
}

function renderStatus(): void {
  if (session === null) return;
  statusBadge.textContent = session.status;
  statusBadge.className = `badge ${session.status}`;
  banner.hidden = session.status === "connected";
  banner.textContent =
    session.status === "reconnecting"
      ? "connection lost, retrying..."
      : "connecting...";
  const lamps = session.lamps;
  lampBox.innerHTML = "";
  for (const [name, good] of [
    ["motors", lamps.enabled],
    ["angle", lamps.angle_ok],
    ["no-slip", !lamps.slip],
    ["battery", !lamps.battery_low],
  ] as [string, boolean][]) {
    const el = document.createElement("span");
    el.className = `lamp ${good ? "ok" : "bad"}`;
    el.textContent = name;
    lampBox.appendChild(el);
  }
  if (session.paused) {
    const el = document.createElement("span");
    el.className = "lamp paused";
    el.textContent = "paused";
    lampBox.appendChild(el);
  }
  countersBox.textContent =
    `frames ${session.counters.frames}` +
    ` | malformed ${session.counters.malformed}` +
    ` | reconnects ${session.counters.reconnects}` +
    (teleop.discardedWhileDisconnected > 0
      ? ` | teleop discarded ${teleop.discardedWhileDisconnected}`
      : "");
}

function buildGainSliders(): void {
  if (tuning === null) return;
  gainsBox.innerHTML = "";
  tuning.edited.forEach((value, i) => {
    const wrap = document.createElement("label");
    wrap.className = "slider-row";
    const span = document.createElement("span");
    span.textContent = `k${i + 1}`;
    const input = document.createElement("input");
    input.type = "range";
    const mag = Math.max(1, Math.abs(value) * 3);
    input.min = String(-mag);
    input.max = String(mag);
    input.step = String(mag / 200);
    input.value = String(value);
    input.addEventListener("input", () => {
      tuning!.editGain(i, Number(input.value));
    });
    const num = document.createElement("input");
    num.type = "text";
    num.value = value.toFixed(3);
    num.addEventListener("change", () => {
      const v = Number(num.value);
      if (Number.isFinite(v)) tuning!.editGain(i, v);
      else errorNote.textContent = "not a number (not sent)";
    });
    wrap.append(span, input, num);
    gainsBox.appendChild(wrap);
  });
}

function renderTuning(): void {
  if (tuning === null) return;
  ackGains.textContent = tuning.acknowledged.length
    ? "acknowledged: [" + tuning.acknowledged.map((v) => v.toFixed(3)).join(", ") + "]"
    : "acknowledged: (none yet)";
  pendingNote.hidden = !tuning.hasPendingEdits;
  errorNote.textContent = tuning.inlineError ?? "";
}

// Weight panel
$<HTMLButtonElement>("resynth").addEventListener("click", () => {
  if (tuning === null || session === null) return;
  const q = ($<HTMLInputElement>("q-input").value || "1,0.01,1,0.01")
    .split(",").map(Number);
  const r = Number($<HTMLInputElement>("r-input").value || "100");
  tuning.editWeights(q, r);
});

// Mode & session controls
$<HTMLButtonElement>("pause").addEventListener("click", () => {
  void session?.send("pause", {});
});
$<HTMLButtonElement>("resume").addEventListener("click", () => {
  void session?.send("resume", {});
});
$<HTMLButtonElement>("reset").addEventListener("click", () => {
  void session?.send("reset", {});
});
$<HTMLSelectElement>("mode").addEventListener("change", (ev) => {
  const mode = (ev.target as HTMLSelectElement).value;
  void session?.send("set_mode", { mode });
});
$<HTMLInputElement>("time-scale").addEventListener("change", (ev) => {
  const scale = Number((ev.target as HTMLInputElement).value);
  void session?.send("set_sim_option", { time_scale: scale });
});
$<HTMLInputElement>("window").addEventListener("input", (ev) => {
  windowSeconds = Math.min(60, Math.max(2, Number((ev.target as HTMLInputElement).value)));
  $("window-label").textContent = `${windowSeconds.toFixed(0)} s`;
});
$<HTMLButtonElement>("connect").addEventListener("click", connect);

// Keyboard teleop
window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  if (teleop.keyDown(ev.key, session?.connected ?? false)) ev.preventDefault();
});
window.addEventListener("keyup", (ev) => {
  if (teleop.keyUp(ev.key)) ev.preventDefault();
});
let lastTeleopTick = performance.now();
setInterval(() => {
  const now = performance.now();
  const dt = (now - lastTeleopTick) / 1000;
  lastTeleopTick = now;
  const cmd = teleop.tick(now, dt);
  if (cmd !== null && session?.connected) {
    void session.send("teleop_velocity", { value: cmd.value });
    $("teleop-value").textContent = `${cmd.value.toFixed(2)} rad/s`;
  }
}, 25);

// Render loop: coalesce telemetry into ~30 Hz draws.
let lastDraw = 0;
function raf(now: number): void {
  if (session !== null && now - lastDraw > 33) {
    lastDraw = now;
    renderCharts(charts, session.frames, windowSeconds);
    robotView.render(session.frames.newest() as Frame | undefined,
                     session.lamps.enabled);
  }
  requestAnimationFrame(raf);
}
requestAnimationFrame(raf);

connect();
