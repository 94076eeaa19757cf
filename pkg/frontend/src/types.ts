/** Wire types for the /v1 session API. */

export type SegmentKind = "thought" | "action" | "environment" | "speech";

export interface WireSegment {
  kind: SegmentKind;
  text: string;
}

export interface WireAction {
  tag: string;
  reason: string;
  initial_scene?: string;
  speaker?: string;
  new_scene?: string;
  new_role_name?: string;
  new_role_profile?: string;
  new_role_motivation?: string;
}

export interface WireMessage {
  record: "message";
  step: number;
  kind: "character" | "manager";
  author: string;
  segments?: WireSegment[];
  action?: WireAction;
}

export interface SessionEvent {
  index: number;
  kind: string;
  payload: Record<string, unknown>;
}

export type Phase =
  | "awaiting_manager"
  | "awaiting_user_turn"
  | "awaiting_actor_turn"
  | "closed";

export interface RosterEntry {
  name: string;
  is_user: boolean;
  display_name: string;
}

export interface SessionSnapshot {
  session_id: string;
  phase: Phase;
  picked: string | null;
  scene: string | null;
  dialogue_turns: number;
  roles: RosterEntry[];
  event_count: number;
  error: string | null;
  manager_mode: string;
}

export interface StyleViolation {
  code: string;
  detail: string;
}

export interface TurnResult {
  accepted: boolean;
  style_violations: StyleViolation[];
  phase: Phase;
}
