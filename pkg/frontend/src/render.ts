/**
 * Pure rendering of a view model into a lightweight virtual-node tree.
 *
 * The four message channels get four distinct style classes; dom.ts turns the
 * tree into real elements in the browser, and tests snapshot the serialized
 * form directly.
 */

import type { StyleViolation } from "./types.js";
import type { TranscriptRow, ViewModel } from "./viewmodel.js";

export interface VNode {
  tag: string;
  attrs: Record<string, string>;
  children: Array<VNode | string>;
}

export function h(
  tag: string,
  attrs: Record<string, string> = {},
  children: Array<VNode | string> = [],
): VNode {
  return { tag, attrs, children };
}

export const CHANNEL_CLASSES: Record<string, string> = {
  thought: "run run-thought",
  action: "run run-action",
  environment: "run run-environment",
  speech: "run run-speech",
};

function renderRow(row: TranscriptRow): VNode {
  if (row.kind === "placeholder") {
    return h("div", { class: "row row-placeholder" }, [row.note]);
  }
  if (row.kind === "banner") {
    const children: Array<VNode | string> = [
      h("span", { class: "banner-text" }, [row.text]),
    ];
    if (row.reason) {
      children.push(h("span", { class: "banner-reason" }, [row.reason]));
    }
    return h("div", { class: `row row-banner banner-${row.action}` }, children);
  }
  const runs = row.runs.map((run) =>
    h("span", { class: CHANNEL_CLASSES[run.kind] }, [run.text]),
  );
  return h("div", { class: row.isUser ? "row row-turn turn-user" : "row row-turn" }, [
    h("span", { class: "author" }, [row.isUser ? `${row.author} (you)` : row.author]),
    h("span", { class: "runs" }, runs),
  ]);
}

export function renderTranscript(vm: ViewModel): VNode {
  return h("div", { class: "transcript" }, vm.transcript.map(renderRow));
}

export function renderSceneBanner(vm: ViewModel): VNode {
  return h("div", { class: "scene-banner" }, [vm.scene ?? "No scene yet"]);
}

export function renderRoster(vm: ViewModel): VNode {
  return h(
    "ul",
    { class: "roster" },
    vm.roster.map((entry) =>
      h("li", { class: entry.is_user ? "roster-entry roster-user" : "roster-entry" }, [
        entry.display_name,
      ]),
    ),
  );
}

export function renderPhase(vm: ViewModel): VNode {
  const label =
    vm.phase === "awaiting_user_turn"
      ? `Your turn${vm.picked ? ` as ${vm.picked}` : ""}`
      : vm.phase === "closed"
        ? "Session closed"
        : vm.phase === "awaiting_actor_turn"
          ? "A character is speaking..."
          : "The scene manager is deciding...";
  return h("div", { class: `phase phase-${vm.phase}` }, [label]);
}

export function renderActionLog(vm: ViewModel): VNode {
  return h(
    "ol",
    { class: "action-log" },
    vm.actionLog.map((entry) =>
      h("li", { class: `log-${entry.action}` }, [
        h("span", { class: "log-action" }, [entry.action]),
        h("span", { class: "log-detail" }, [entry.detail]),
        h("span", { class: "log-reason" }, [entry.reason]),
      ]),
    ),
  );
}

export function renderViolationHints(violations: StyleViolation[]): VNode {
  return h(
    "ul",
    { class: "violation-hints" },
    violations.map((v) => h("li", { class: `hint hint-${v.code}` }, [v.detail])),
  );
}

export function renderComposer(vm: ViewModel): VNode {
  const attrs: Record<string, string> = { class: "composer-input" };
  if (!vm.composerEnabled) {
    attrs["disabled"] = "disabled";
  }
  return h("div", { class: "composer" }, [
    h("textarea", attrs, []),
    h(
      "button",
      vm.composerEnabled
        ? { class: "composer-send" }
        : { class: "composer-send", disabled: "disabled" },
      ["Send"],
    ),
  ]);
}

/** Deterministic serialization used by snapshot tests. */
export function toHtml(node: VNode | string): string {
  if (typeof node === "string") {
    return node
      .replace(/&/g, "&amp;")
      .replace(/</g, "&lt;")
      .replace(/>/g, "&gt;");
  }
  const attrs = Object.entries(node.attrs)
    .sort(([a], [b]) => (a < b ? -1 : 1))
    .map(([key, value]) => ` ${key}="${value}"`)
    .join("");
  const children = node.children.map(toHtml).join("");
  return `<${node.tag}${attrs}>${children}</${node.tag}>`;
}
