/** Wire types mirroring the session service's JSON API. */

export interface StudentState {
  student_id: string;
  group_id: string;
  pass_rate: number;
  activity_level: number;
  last_code_issue: string | null;
}

export interface GroupState {
  group_id: string;
  member_ids: string[];
  group_pass_rate: number;
  team_activity: number;
  members_participated: number;
  topic_id: string;
}

export interface CriteriaJson {
  scope: "Group" | "Individual";
  numeric_ranges: Record<string, [number, number]>;
  categorical_sets: Record<string, string[]>;
}

export interface NotificationJson {
  id: string;
  type: "Alert" | "Tracker";
  status: "Suggested" | "Active" | "Dismissed";
  reason: string;
  criteria?: CriteriaJson;
  mode?: "Spatial" | "Temporal";
  threshold?: number;
  match_list?: string[];
  match_count?: number;
  trigger_count?: number;
  attribute?: string;
  chart?: "Bar" | "Line";
  series?: Array<[number, Record<string, number>]>;
}

export interface SuggestionDraftJson {
  draft_id: string;
  kind: "Alert" | "Tracker";
  reason: string;
  provenance: "InteractionBased" | "HistoricBased";
  created_at_s: number;
  criteria?: CriteriaJson;
  mode?: "Spatial" | "Temporal";
  threshold?: number;
  attribute?: string;
  chart?: string;
}

export interface TopicsJson {
  topics: Record<string, string>;
  order: string[];
  assignments: Record<string, string>;
}

export interface SnapshotJson {
  session_id: string;
  time_s: number;
  clock: { now_s: number; speed: number; mode: string };
  view: string;
  students: Record<string, StudentState>;
  groups: Record<string, GroupState>;
  notifications: NotificationJson[];
  topics: TopicsJson;
  events_applied: number;
}

export type MessageKind =
  | "FrameDelta"
  | "TriggerEvent"
  | "SuggestionDraft"
  | "NotificationStateChange"
  | "TopicRegistryUpdate"
  | "ClockUpdate";

export interface StreamMessage {
  kind: MessageKind;
  payload: any;
}

export interface FrameDeltaPayload {
  time_s: number;
  change_set: Array<[string, string]>;
  students: Record<string, StudentState>;
  groups: Record<string, GroupState>;
}

export interface TriggerPayload {
  notification_id: string;
  time_s: number;
  entered: string[];
  kind: "SpatialThresholdCrossed" | "TemporalTimerExpired";
}

export type ViewLevel = "GroupView" | "StructureView" | "IndividualView";

export type Gesture =
  | { kind: "PointClick"; entity_id: string }
  | { kind: "AreaSelect"; x_range: [number, number]; y_range: [number, number] }
  | { kind: "DetailRowExpand"; attribute_value: string };
