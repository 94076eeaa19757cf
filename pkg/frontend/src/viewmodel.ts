/**
 * Pure projection of the ordered event stream into what the page shows.
 *
 * The server is the single source of truth: the view model is rebuilt from
 * (roster, events) alone, so replaying the same events always yields the same
 * view. Malformed events become placeholder rows and never break the fold.
 */

import type {
  Phase,
  RosterEntry,
  SegmentKind,
  SessionEvent,
  WireAction,
  WireMessage,
  WireSegment,
} from "./types.js";

export interface StyledRun {
  kind: SegmentKind;
  text: string;
}

export interface TurnRow {
  kind: "turn";
  author: string;
  isUser: boolean;
  runs: StyledRun[];
}

export interface BannerRow {
  kind: "banner";
  action: string;
  text: string;
  reason: string;
}

export interface PlaceholderRow {
  kind: "placeholder";
  note: string;
}

export type TranscriptRow = TurnRow | BannerRow | PlaceholderRow;

export interface ActionLogEntry {
  action: string;
  detail: string;
  reason: string;
}

export interface ViewModel {
  transcript: TranscriptRow[];
  scene: string | null;
  phase: Phase;
  picked: string | null;
  roster: RosterEntry[];
  actionLog: ActionLogEntry[];
  composerEnabled: boolean;
  lastError: string | null;
}

const SEGMENT_KINDS: SegmentKind[] = ["thought", "action", "environment", "speech"];

function isSegment(value: unknown): value is WireSegment {
  if (typeof value !== "object" || value === null) return false;
  const seg = value as Partial<WireSegment>;
  return (
    typeof seg.text === "string" && SEGMENT_KINDS.includes(seg.kind as SegmentKind)
  );
}

function bannerText(action: WireAction): string {
  switch (action.tag) {
    case "init_scene":
      return `Scene: ${action.initial_scene ?? ""}`;
    case "switch_scene":
      return `Scene change: ${action.new_scene ?? ""}`;
    case "add_role":
      return `${action.new_role_name ?? "A new role"} joins the story`;
    case "end":
      return "The story ends";
    default:
      return action.tag;
  }
}

function foldMessage(
  vm: ViewModel,
  payload: Record<string, unknown>,
  userNames: Set<string>,
): void {
  const message = payload["message"] as WireMessage | undefined;
  if (!message || (message.kind !== "character" && message.kind !== "manager")) {
    vm.transcript.push({ kind: "placeholder", note: "unreadable event" });
    return;
  }
  if (typeof payload["scene"] === "string") {
    vm.scene = payload["scene"] as string;
  }
  if (message.kind === "character") {
    const segments = Array.isArray(message.segments) ? message.segments : [];
    const runs: StyledRun[] = [];
    for (const segment of segments) {
      if (isSegment(segment)) {
        runs.push({ kind: segment.kind, text: segment.text });
      }
    }
    vm.transcript.push({
      kind: "turn",
      author: message.author,
      isUser: userNames.has(message.author),
      runs,
    });
    return;
  }
  const action = message.action;
  if (!action || typeof action.tag !== "string") {
    vm.transcript.push({ kind: "placeholder", note: "unreadable manager event" });
    return;
  }
  vm.transcript.push({
    kind: "banner",
    action: action.tag,
    text: bannerText(action),
    reason: action.reason ?? "",
  });
  vm.actionLog.push({ action: action.tag, detail: bannerText(action), reason: action.reason ?? "" });
  if (action.tag === "add_role" && action.new_role_name) {
    vm.roster = vm.roster.concat([
      {
        name: action.new_role_name,
        is_user: false,
        display_name: action.new_role_name,
      },
    ]);
  }
}

export function buildViewModel(roster: RosterEntry[], events: SessionEvent[]): ViewModel {
  const vm: ViewModel = {
    transcript: [],
    scene: null,
    phase: "awaiting_manager",
    picked: null,
    roster: roster.slice(),
    actionLog: [],
    composerEnabled: false,
    lastError: null,
  };
  const userNames = new Set(roster.filter((r) => r.is_user).map((r) => r.name));
  for (const event of events) {
    try {
      switch (event.kind) {
        case "message":
          foldMessage(vm, event.payload, userNames);
          break;
        case "phase": {
          const phase = event.payload["phase"];
          if (typeof phase === "string") {
            vm.phase = phase as Phase;
            vm.picked =
              typeof event.payload["picked"] === "string"
                ? (event.payload["picked"] as string)
                : null;
          }
          break;
        }
        case "action": {
          const action = String(event.payload["action"] ?? "");
          const speaker = String(event.payload["speaker"] ?? "");
          const reason = String(event.payload["reason"] ?? "");
          vm.actionLog.push({ action, detail: speaker, reason });
          break;
        }
        case "error":
          vm.lastError = String(event.payload["message"] ?? "backend error");
          break;
        default:
          vm.transcript.push({ kind: "placeholder", note: `unknown event ${event.kind}` });
      }
    } catch {
      vm.transcript.push({ kind: "placeholder", note: "unreadable event" });
    }
  }
  vm.composerEnabled = vm.phase === "awaiting_user_turn";
  return vm;
}
