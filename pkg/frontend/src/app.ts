/** Single-page app wiring: forms, playback, rating, charts, models.
 *
 * All state flows one way: service response -> reducer (state.ts) -> render.
 * The DOM below is rebuilt from the view after every change; nothing in the
 * page holds state of its own.
 */

import { ApiClient, ApiError } from "./api.js";
import { buildSchedule, playSchedule, scheduleLengthSec } from "./audio.js";
import { explorationPoints, exploredRatio, polylinePoints, qualityPoints } from "./chart.js";
import {
  ConfigForm,
  DEFAULT_CONFIG,
  DEFAULT_HYPERPARAMS,
  HyperForm,
  SCALE_TYPES,
  validateConfig,
  validateHyperparams,
  wireConfig,
  wireHyperparams,
} from "./form.js";
import {
  applyEvent,
  applyRating,
  ratingEnabled,
  UiSessionView,
  viewFromCreated,
} from "./state.js";
import type { EvaluationForm, SessionEvent, WireTrack } from "./types.js";

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Child[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function describeTrack(track: WireTrack): string {
  const notes = track.melody
    .map((note) =>
      note.degree === "rest" ? `(rest ${note.duration})` : `${note.degree}:${note.duration}`,
    )
    .join(" ");
  return `${track.scale.base} ${track.scale.kind} | ${notes} | drums ${track.percussion.join("")}`;
}

export class App {
  private view: UiSessionView | null = null;
  private socket: WebSocket | null = null;
  private banner = el("div", { class: "banner", hidden: "" });
  private audio: AudioContext | null = null;
  private config: ConfigForm = { ...DEFAULT_CONFIG };
  private hyper: HyperForm = { ...DEFAULT_HYPERPARAMS };
  private sessionPanel = el("section", { class: "session" });
  private modelsPanel = el("section", { class: "models" });
  private busy = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  mount(): void {
    this.root.append(
      el("h1", {}, ["qmuse"]),
      this.banner,
      this.buildSetupForm(),
      this.sessionPanel,
      this.modelsPanel,
    );
    void this.refreshModels();
  }

  private showError(message: string): void {
    this.banner.textContent = message;
    this.banner.hidden = false;
  }

  private clearError(): void {
    this.banner.hidden = true;
  }

  private buildSetupForm(): HTMLElement {
    const errors = el("p", { class: "errors" });
    const fields: Array<[string, keyof ConfigForm | keyof HyperForm, string, boolean]> = [
      ["base note", "baseNote", String(this.config.baseNote), true],
      ["track length", "trackLength", String(this.config.trackLength), true],
      ["tempo (bpm)", "tempoBpm", String(this.config.tempoBpm), true],
      ["volume", "volume", String(this.config.volume), true],
      ["seed", "seed", String(this.config.seed), true],
      ["episodes", "episodes", String(this.hyper.episodes), false],
      ["alpha", "alpha", String(this.hyper.alpha), false],
      ["gamma", "gamma", String(this.hyper.gamma), false],
      ["epsilon", "epsilon", String(this.hyper.epsilon), false],
    ];
    const inputs = new Map<string, HTMLInputElement>();
    const form = el("form", { class: "setup" });
    const scaleSelect = el("select", { name: "scaleType" });
    for (const kind of SCALE_TYPES) {
      scaleSelect.append(el("option", { value: kind }, [kind]));
    }
    form.append(el("label", {}, ["scale ", scaleSelect]));
    for (const [label, name, value, isConfig] of fields) {
      const input = el("input", { name: String(name), value });
      inputs.set(`${isConfig ? "c" : "h"}:${String(name)}`, input);
      form.append(el("label", {}, [`${label} `, input]));
    }
    const submit = el("button", { type: "submit" }, ["start session"]);
    form.append(submit, errors);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const read = (key: string): number => Number(inputs.get(key)?.value ?? "");
      this.config = {
        baseNote: inputs.get("c:baseNote")?.value ?? "",
        scaleType: scaleSelect.value,
        trackLength: read("c:trackLength"),
        tempoBpm: read("c:tempoBpm"),
        volume: read("c:volume"),
        seed: read("c:seed"),
      };
      this.hyper = {
        ...this.hyper,
        episodes: read("h:episodes"),
        alpha: read("h:alpha"),
        gamma: read("h:gamma"),
        epsilon: read("h:epsilon"),
      };
      const problems = { ...validateConfig(this.config), ...validateHyperparams(this.hyper) };
      const messages = Object.entries(problems).map(([field, hint]) => `${field}: ${hint}`);
      errors.textContent = messages.join("; ");
      if (messages.length === 0) {
        void this.startSession();
      }
    });
    return el("section", { class: "setup-panel" }, [form]);
  }

  private async startSession(): Promise<void> {
    try {
      const created = await this.client.createSession(
        wireConfig(this.config),
        wireHyperparams(this.hyper),
      );
      this.adoptView(viewFromCreated(created));
    } catch (failure) {
      this.showError(failure instanceof Error ? failure.message : String(failure));
    }
  }

  private adoptView(view: UiSessionView): void {
    this.view = view;
    this.clearError();
    this.connectEvents(view.sessionId);
    this.render();
  }

  private connectEvents(sessionId: string): void {
    this.socket?.close();
    const socket = new WebSocket(this.client.eventsUrl(sessionId));
    socket.addEventListener("message", (message: MessageEvent<string>) => {
      if (this.view === null || this.view.sessionId !== sessionId) {
        return;
      }
      const event = JSON.parse(message.data) as SessionEvent;
      const next = applyEvent(this.view, event);
      if (next !== this.view) {
        this.view = next;
        this.render();
      }
    });
    socket.addEventListener("close", () => {
      // reconcile after reconnect: the server replays its whole backlog and
      // applyEvent drops everything at or below lastSeq.
      if (this.view !== null && this.view.sessionId === sessionId && this.view.phase !== "completed") {
        setTimeout(() => this.connectEvents(sessionId), 1000);
      }
    });
    this.socket = socket;
  }

  private async rate(value: number): Promise<void> {
    if (this.view === null || !ratingEnabled(this.view) || this.busy) {
      return;
    }
    this.busy = true;
    this.render();
    try {
      const response = await this.client.submitRating(this.view.sessionId, value);
      this.view = applyRating(this.view, response);
      this.clearError();
    } catch (failure) {
      if (failure instanceof ApiError) {
        this.showError(failure.detail);
      } else {
        this.showError("network trouble; the rating was not applied");
      }
    } finally {
      this.busy = false;
      this.render();
      void this.refreshModels();
    }
  }

  private async play(track: WireTrack): Promise<void> {
    try {
      this.audio = this.audio ?? new AudioContext();
      await this.audio.resume();
    } catch {
      this.showError("audio output is unavailable in this browser; rating still works");
      return;
    }
    await playSchedule(this.audio, buildSchedule(track));
  }

  private async refreshModels(): Promise<void> {
    try {
      const { models } = await this.client.listModels();
      this.modelsPanel.replaceChildren(el("h2", {}, ["models"]));
      const saveName = el("input", { placeholder: "model name" });
      const saveButton = el("button", {}, ["save current session"]);
      saveButton.addEventListener("click", () => {
        if (this.view !== null && saveName.value !== "") {
          void this.client
            .saveModel(saveName.value, this.view.sessionId)
            .then(() => this.refreshModels())
            .catch((failure: unknown) =>
              this.showError(failure instanceof Error ? failure.message : "save failed"),
            );
        }
      });
      this.modelsPanel.append(el("p", {}, [saveName, " ", saveButton]));
      for (const model of models) {
        const load = el("button", {}, ["continue training"]);
        load.addEventListener("click", () => {
          void this.client
            .createSessionFromModel(model.name)
            .then((created) => this.adoptView(viewFromCreated(created)))
            .catch((failure: unknown) =>
              this.showError(failure instanceof ApiError ? failure.detail : "load failed"),
            );
        });
        const label =
          model.error !== undefined
            ? `${model.name} (unreadable)`
            : `${model.name} (${model.episodes_completed ?? 0} episodes)`;
        this.modelsPanel.append(el("p", {}, [label, " ", load]));
      }
    } catch {
      // the models list is decorative; leave the panel as it was
    }
  }

  private buildEvaluationForm(sessionId: string): HTMLElement {
    const panel = el("section", { class: "evaluation" }, [el("h2", {}, ["how was it?"])]);
    const scores = new Map<string, HTMLInputElement>();
    for (const name of ["musicality", "novelty", "coherence"]) {
      const input = el("input", { type: "number", min: "1", max: "5", value: "3" });
      scores.set(name, input);
      panel.append(el("label", {}, [`${name} (1-5) `, input]));
    }
    const comment = el("input", { placeholder: "comment" });
    const expertise = el("select", {});
    for (const level of ["None", "Beginner", "Intermediate", "Expert"]) {
      expertise.append(el("option", { value: level }, [level]));
    }
    const send = el("button", {}, ["send evaluation"]);
    send.addEventListener("click", () => {
      const form: EvaluationForm = {
        musicality: Number(scores.get("musicality")?.value),
        novelty: Number(scores.get("novelty")?.value),
        coherence: Number(scores.get("coherence")?.value),
        comment: comment.value,
        expertise: expertise.value as EvaluationForm["expertise"],
      };
      void this.client
        .submitEvaluation(sessionId, form)
        .then(() => panel.replaceChildren(el("p", {}, ["thanks, recorded."])))
        .catch((failure: unknown) =>
          this.showError(failure instanceof ApiError ? failure.detail : "evaluation failed"),
        );
    });
    panel.append(el("p", {}, [comment, " ", expertise, " ", send]));
    return panel;
  }

  private render(): void {
    const view = this.view;
    this.sessionPanel.replaceChildren();
    if (view === null) {
      return;
    }
    const header = el("h2", {}, [
      `episode ${view.episode}, step ${view.step} (${view.phase})`,
    ]);
    this.sessionPanel.append(header);

    if (view.track !== null) {
      const track = view.track;
      const play = el("button", {}, [`play (${scheduleLengthSec(track).toFixed(1)} s)`]);
      play.addEventListener("click", () => void this.play(track));
      const download =
        view.midiUrl === null
          ? ""
          : el("a", { href: view.midiUrl, download: "track.mid" }, ["download .mid"]);
      this.sessionPanel.append(
        el("p", { class: "track" }, [describeTrack(track)]),
        el("p", {}, [play, " ", download]),
      );
    }

    const controls = el("p", { class: "ratings" });
    for (let value = 1; value <= 10; value += 1) {
      const button = el("button", {}, [String(value)]);
      button.disabled = !ratingEnabled(view) || this.busy;
      button.addEventListener("click", () => void this.rate(value));
      controls.append(button);
    }
    this.sessionPanel.append(controls);

    const quality = qualityPoints(view.episodeMeans);
    const exploration = explorationPoints(view.applied);
    const ratio = exploredRatio(view.exploredCount, view.totalSteps);
    const charts = el("div", { class: "charts" });
    for (const [title, points, yMax] of [
      ["episode quality", quality, 10],
      ["explored fraction", exploration, 1],
    ] as const) {
      const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
      svg.setAttribute("viewBox", "0 0 200 80");
      svg.setAttribute("class", "chart");
      const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
      line.setAttribute("points", polylinePoints(points, 200, 80, yMax));
      line.setAttribute("fill", "none");
      line.setAttribute("stroke", "currentColor");
      svg.append(line);
      charts.append(el("figure", {}, [svg, el("figcaption", {}, [title])]));
    }
    this.sessionPanel.append(
      charts,
      el("p", {}, [
        `steps ${view.totalSteps}, explored ${
          ratio === null ? "n/a" : `${(ratio * 100).toFixed(0)}%`
        }, means [${view.episodeMeans.map((m) => m.toFixed(2)).join(", ")}]`,
      ]),
    );

    if (view.phase === "completed") {
      this.sessionPanel.append(this.buildEvaluationForm(view.sessionId));
    }
  }
}

export function mountApp(root: HTMLElement, baseUrl = ""): App {
  const app = new App(root, new ApiClient(baseUrl));
  app.mount();
  return app;
}
