/** Structure-view node-link glyph data.
 *
 * At most the eight lowest-pass-rate groups render as glyphs. Member nodes
 * are green when the student passed every unit test, pink otherwise; edge
 * widths follow min(A * 0.25, 2) + 1 where A is the member's activity level.
 */
import type { GroupState, StudentState } from "./types";

export const MAX_GLYPHS = 8;

export interface GlyphNode {
  student_id: string;
  color: "green" | "pink";
  activity_level: number;
}

export interface GlyphEdge {
  from: string;
  to: string;
  width: number;
}

export interface StructureGlyph {
  group_id: string;
  topic_id: string;
  members_participated: number;
  nodes: GlyphNode[];
  edges: GlyphEdge[];
}

export function arrowThickness(activityLevel: number): number {
  return Math.min(Math.max(activityLevel, 0) * 0.25, 2) + 1;
}

export function lowestPassRateGroups(groups: Record<string, GroupState>, cap = MAX_GLYPHS): string[] {
  return Object.values(groups)
    .sort((a, b) => a.group_pass_rate - b.group_pass_rate || a.group_id.localeCompare(b.group_id))
    .slice(0, cap)
    .map((g) => g.group_id);
}

export function buildGlyph(
  group: GroupState,
  students: Record<string, StudentState>,
): StructureGlyph {
  const nodes: GlyphNode[] = group.member_ids.map((sid) => {
    const s = students[sid];
    return {
      student_id: sid,
      color: s && s.pass_rate === 100 ? "green" : "pink",
      activity_level: s ? s.activity_level : 0,
    };
  });
  const edges: GlyphEdge[] = [];
  for (let i = 0; i < group.member_ids.length; i++) {
    for (let j = 0; j < group.member_ids.length; j++) {
      if (i === j) continue;
      const from = group.member_ids[i];
      edges.push({
        from,
        to: group.member_ids[j],
        width: arrowThickness(students[from]?.activity_level ?? 0),
      });
    }
  }
  return {
    group_id: group.group_id,
    topic_id: group.topic_id,
    members_participated: group.members_participated,
    nodes,
    edges,
  };
}

export function structureGlyphs(
  groups: Record<string, GroupState>,
  students: Record<string, StudentState>,
): StructureGlyph[] {
  return lowestPassRateGroups(groups).map((gid) => buildGlyph(groups[gid], students));
}
