import { describe, expect, it } from "vitest";

import {
  CHANNEL_CLASSES,
  renderComposer,
  renderRoster,
  renderTranscript,
  toHtml,
} from "../src/render.js";
import { buildViewModel } from "../src/viewmodel.js";
import type { RosterEntry, SessionEvent } from "../src/types.js";

const ROSTER: RosterEntry[] = [
  { name: "Isolde Ferrowind", is_user: false, display_name: "Isolde Ferrowind" },
  { name: "Taron Corvith", is_user: false, display_name: "Taron Corvith" },
  { name: "Valdrex", is_user: true, display_name: "Valdrex (user)" },
];

// The showcase transcript: scene initialization plus the two opening turns,
// which together exercise all four message channels.
const EVENTS: SessionEvent[] = [
  {
    index: 0,
    kind: "message",
    payload: {
      message: {
        record: "message",
        step: 1,
        kind: "manager",
        author: "scene_manager",
        action: {
          tag: "init_scene",
          reason: "",
          initial_scene:
            "The deck of the airship Orphan Gale at dawn, steam hissing beneath brass fittings and clouds glowing below.",
        },
      },
      scene:
        "The deck of the airship Orphan Gale at dawn, steam hissing beneath brass fittings and clouds glowing below.",
    },
  },
  {
    index: 1,
    kind: "message",
    payload: {
      message: {
        record: "message",
        step: 2,
        kind: "character",
        author: "Isolde Ferrowind",
        segments: [
          { kind: "environment", text: "The compass trembles" },
          { kind: "thought", text: "The winds shift too fast" },
          { kind: "speech", text: "Keep sharp, Taron." },
        ],
      },
    },
  },
  {
    index: 2,
    kind: "message",
    payload: {
      message: {
        record: "message",
        step: 3,
        kind: "character",
        author: "Taron Corvith",
        segments: [
          { kind: "action", text: "sketching rapidly" },
          { kind: "speech", text: "The currents twist like braided rivers..." },
        ],
      },
    },
  },
];

describe("renderTranscript", () => {
  it("gives the four channels four distinct style classes", () => {
    const classes = Object.values(CHANNEL_CLASSES);
    expect(new Set(classes).size).toBe(4);
  });

  it("matches the transcript snapshot with all four channel styles", () => {
    const vm = buildViewModel(ROSTER, EVENTS);
    const html = toHtml(renderTranscript(vm));
    expect(html).toContain('class="run run-environment"');
    expect(html).toContain('class="run run-thought"');
    expect(html).toContain('class="run run-speech"');
    expect(html).toContain('class="run run-action"');
    expect(html).toMatchSnapshot();
  });

  it("renders manager decisions as inline banners", () => {
    const vm = buildViewModel(ROSTER, EVENTS);
    const html = toHtml(renderTranscript(vm));
    expect(html).toContain("row-banner");
    expect(html).toContain("banner-init_scene");
  });

  it("renders a placeholder row for malformed events", () => {
    const malformed: SessionEvent = { index: 3, kind: "message", payload: {} };
    const vm = buildViewModel(ROSTER, [...EVENTS, malformed]);
    const html = toHtml(renderTranscript(vm));
    expect(html).toContain("row-placeholder");
  });
});

describe("renderRoster", () => {
  it("highlights the user entry", () => {
    const vm = buildViewModel(ROSTER, EVENTS);
    const html = toHtml(renderRoster(vm));
    expect(html).toContain('class="roster-entry roster-user"');
    expect(html).toContain("Valdrex (user)");
  });
});

describe("renderComposer", () => {
  it("disables the input except in awaiting_user_turn", () => {
    const idle = buildViewModel(ROSTER, EVENTS);
    expect(toHtml(renderComposer(idle))).toContain('disabled="disabled"');

    const ready = buildViewModel(ROSTER, [
      ...EVENTS,
      { index: 3, kind: "phase", payload: { phase: "awaiting_user_turn", picked: "Valdrex" } },
    ]);
    const html = toHtml(renderComposer(ready));
    expect(html).not.toContain("disabled");
  });

  it("locks again once the session closes", () => {
    const closed = buildViewModel(ROSTER, [
      ...EVENTS,
      { index: 3, kind: "phase", payload: { phase: "awaiting_user_turn", picked: "Valdrex" } },
      { index: 4, kind: "phase", payload: { phase: "closed" } },
    ]);
    expect(toHtml(renderComposer(closed))).toContain('disabled="disabled"');
  });
});
