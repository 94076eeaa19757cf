/**
 * Browser bootstrap: create a session from a seed pasted into the page, then
 * poll the event stream and re-render on every change. The composer unlocks
 * only while the server says it is the human's turn.
 */

import { ConflictError, SessionClient, type FetchLike } from "./client.js";
import {
  renderActionLog,
  renderComposer,
  renderPhase,
  renderRoster,
  renderSceneBanner,
  renderTranscript,
  renderViolationHints,
} from "./render.js";
import { replaceChildren } from "./dom.js";
import type { RosterEntry, SessionEvent, StyleViolation } from "./types.js";
import { buildViewModel } from "./viewmodel.js";

interface AppElements {
  transcript: Element;
  scene: Element;
  roster: Element;
  phase: Element;
  actionLog: Element;
  composer: Element;
  hints: Element;
}

export async function startApp(
  root: Document,
  baseUrl: string,
  seed: Record<string, unknown>,
  fetchImpl?: FetchLike,
): Promise<void> {
  const elements: AppElements = {
    transcript: root.querySelector("#transcript")!,
    scene: root.querySelector("#scene")!,
    roster: root.querySelector("#roster")!,
    phase: root.querySelector("#phase")!,
    actionLog: root.querySelector("#action-log")!,
    composer: root.querySelector("#composer")!,
    hints: root.querySelector("#hints")!,
  };
  const client = new SessionClient(
    baseUrl,
    fetchImpl ?? ((url, init) => fetch(url, init) as unknown as ReturnType<FetchLike>),
  );
  const sessionId = await client.createSession(seed);
  const snapshot = await client.snapshot(sessionId);
  const roster: RosterEntry[] = snapshot.roles;
  const events: SessionEvent[] = [];
  let hints: StyleViolation[] = [];
  let pendingEcho: string | null = null;

  const redraw = () => {
    const vm = buildViewModel(roster, events);
    if (pendingEcho !== null && vm.composerEnabled) {
      // optimistic echo still unconfirmed; keep the composer locked
      vm.composerEnabled = false;
    }
    replaceChildren(elements.transcript, renderTranscript(vm));
    replaceChildren(elements.scene, renderSceneBanner(vm));
    replaceChildren(elements.roster, renderRoster(vm));
    replaceChildren(elements.phase, renderPhase(vm));
    replaceChildren(elements.actionLog, renderActionLog(vm));
    replaceChildren(elements.composer, renderComposer(vm));
    replaceChildren(elements.hints, renderViolationHints(hints));
    wireComposer(vm.composerEnabled);
  };

  const wireComposer = (enabled: boolean) => {
    const button = elements.composer.querySelector("button");
    const input = elements.composer.querySelector("textarea");
    if (!button || !input) return;
    button.addEventListener("click", async () => {
      if (!enabled) return;
      const text = input.value.trim();
      if (!text) return;
      pendingEcho = text;
      redraw();
      try {
        const result = await client.submitTurn(sessionId, text);
        hints = result.style_violations;
      } catch (error) {
        if (error instanceof ConflictError) {
          // echo retracted; the next poll re-syncs the real phase
          pendingEcho = null;
        } else {
          throw error;
        }
      }
      pendingEcho = null;
      await drain();
    });
  };

  const drain = async () => {
    const fresh = await client.pollEvents(sessionId, 0);
    if (fresh.length > 0) {
      events.push(...fresh);
      if (fresh.some((e) => e.kind === "message" && pendingEcho !== null)) {
        pendingEcho = null; // echo confirmed by the authoritative stream
      }
    }
    redraw();
  };

  await drain();
  const loop = async () => {
    for (;;) {
      try {
        const fresh = await client.pollEvents(sessionId, 20);
        if (fresh.length > 0) {
          events.push(...fresh);
          redraw();
        }
        const vm = buildViewModel(roster, events);
        if (vm.phase === "closed") {
          return;
        }
      } catch {
        await new Promise((resolve) => setTimeout(resolve, 1000));
      }
    }
  };
  void loop();
}
