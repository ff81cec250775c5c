import { describe, expect, it } from "vitest";
import {
  brushToRanges,
  plotGroupPoint,
  plotPoint,
  plotStructurePoint,
  plotStudentPoint,
  topicAxisOrder,
} from "../src/scales";
import type { GroupState, StudentState, TopicsJson } from "../src/types";

const SIZE = { width: 800, height: 600 };

const group = (over: Partial<GroupState> = {}): GroupState => ({
  group_id: "g1",
  member_ids: ["a", "b", "c"],
  group_pass_rate: 0,
  team_activity: 0,
  members_participated: 0,
  topic_id: "No Conversation",
  ...over,
});

const student = (over: Partial<StudentState> = {}): StudentState => ({
  student_id: "s1",
  group_id: "g1",
  pass_rate: 0,
  activity_level: 0,
  last_code_issue: null,
  ...over,
});

const topics: TopicsJson = {
  topics: { t1: "Counting", t2: "Syntax", t3: "Greetings" },
  order: ["t1", "t2", "t3"],
  assignments: { g1: "t1" },
};

describe("group/individual placement", () => {
  it("places the worked-example group fractionally on both axes", () => {
    const p = plotGroupPoint(
      group({ group_pass_rate: 33.333333333333336, team_activity: 3.6666666666666665 }),
      SIZE,
    );
    expect(p.x / SIZE.width).toBeCloseTo(0.33333333, 6);
    expect(1 - p.y / SIZE.height).toBeCloseTo(3.6666666666666665 / 12, 6);
  });

  it("puts a zero student at the origin corner", () => {
    const p = plotStudentPoint(student(), SIZE);
    expect(p.x).toBe(0);
    expect(p.y).toBe(SIZE.height);
  });

  it("clamps out-of-domain values to the axis bounds", () => {
    const p = plotStudentPoint(student({ pass_rate: 250, activity_level: -4 }), SIZE);
    expect(p.x).toBe(SIZE.width);
    expect(p.y).toBe(SIZE.height);
  });

  it("is deterministic", () => {
    const g = group({ group_pass_rate: 42, team_activity: 7 });
    expect(plotGroupPoint(g, SIZE)).toEqual(plotGroupPoint(g, SIZE));
  });
});

describe("structure placement", () => {
  it("maps topic index to column and participation to row", () => {
    const p = plotStructurePoint(
      group({ topic_id: "t3", members_participated: 2 }),
      topics,
      SIZE,
    );
    expect(p.x).toBe(SIZE.width); // index 2 of columns 0..2
    expect(1 - p.y / SIZE.height).toBeCloseTo(2 / 3, 9);
  });

  it("keeps axis order stable as registry grows", () => {
    const before = topicAxisOrder(topics);
    const grown: TopicsJson = {
      ...topics,
      topics: { ...topics.topics, t4: "New" },
      order: [...topics.order, "t4"],
    };
    expect(topicAxisOrder(grown).slice(0, before.length)).toEqual(before);
  });

  it("places sentinel topics ahead of registered ones", () => {
    const withSentinel: TopicsJson = {
      ...topics,
      assignments: { g1: "No Conversation", g2: "t1" },
    };
    const order = topicAxisOrder(withSentinel);
    expect(order[0]).toBe("No Conversation");
  });

  it("plotPoint dispatches on the view level", () => {
    const g = group({ group_pass_rate: 100, team_activity: 12 });
    expect(plotPoint(g, "GroupView", topics, SIZE)).toEqual({ x: SIZE.width, y: 0 });
    const s = student({ pass_rate: 50, activity_level: 6 });
    expect(plotPoint(s, "IndividualView", topics, SIZE)).toEqual({
      x: SIZE.width / 2,
      y: SIZE.height / 2,
    });
  });
});

describe("brush inversion", () => {
  it("maps a pixel brush back to pass-rate/activity ranges", () => {
    const { x_range, y_range } = brushToRanges([0, 400], [0, 600], "IndividualView", SIZE);
    expect(x_range[0]).toBeCloseTo(0);
    expect(x_range[1]).toBeCloseTo(50);
    expect(y_range[0]).toBeCloseTo(0);
    expect(y_range[1]).toBeCloseTo(12);
  });

  it("uses the participation domain in structure view", () => {
    const { y_range } = brushToRanges([0, 800], [300, 600], "StructureView", SIZE);
    expect(y_range[0]).toBeCloseTo(0);
    expect(y_range[1]).toBeCloseTo(1.5);
  });
});
