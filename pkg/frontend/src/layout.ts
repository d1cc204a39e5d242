/**
 * Scene computation: trace document in, drawable geometry out.
 *
 * Process axis runs vertically (one lane per rank), time runs
 * horizontally. The document is already reduced server-side, so every
 * event in it is drawn; the layout never filters. Lane order, spacing,
 * and the collision nudge are all deterministic so the same document
 * always yields the same scene.
 */

import { routineColor } from "./colors.js";
import type { RelationKind, TraceDocument, TraceEvent } from "./trace.js";

export const LANE_HEIGHT = 56;
export const MARGIN_LEFT = 96;
export const MARGIN_TOP = 28;
export const MARGIN_RIGHT = 40;
export const NODE_RADIUS = 7;
export const PX_PER_TICK = 18;
export const MIN_NODE_GAP = 28;
export const STUB_LENGTH = 24;

export interface SceneLane {
  rank: number;
  y: number;
}

export interface SceneNode {
  no: number;
  rank: number;
  x: number;
  y: number;
  color: string;
  failed: boolean;
  routine: string;
}

export interface SceneEdge {
  src: number;
  dst: number;
  kind: RelationKind;
  dotted: boolean;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

/** Dangling dotted line for a failed communication with no partner edge. */
export interface SceneStub {
  no: number;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface Scene {
  width: number;
  height: number;
  lanes: SceneLane[];
  nodes: SceneNode[];
  edges: SceneEdge[];
  stubs: SceneStub[];
}

function laneCenter(index: number): number {
  return MARGIN_TOP + index * LANE_HEIGHT + LANE_HEIGHT / 2;
}

export function buildScene(doc: TraceDocument): Scene {
  const ranks = [...new Set(doc.events.map((ev) => ev.rank))].sort(
    (a, b) => a - b
  );
  const laneY = new Map<number, number>();
  const lanes: SceneLane[] = ranks.map((rank, i) => {
    const y = laneCenter(i);
    laneY.set(rank, y);
    return { rank, y };
  });

  const byLane = new Map<number, TraceEvent[]>();
  for (const ev of doc.events) {
    const lane = byLane.get(ev.rank);
    if (lane) {
      lane.push(ev);
    } else {
      byLane.set(ev.rank, [ev]);
    }
  }

  const nodes: SceneNode[] = [];
  const position = new Map<number, SceneNode>();
  let maxX = MARGIN_LEFT;
  for (const rank of ranks) {
    const lane = byLane.get(rank)!;
    lane.sort((a, b) => a.seq - b.seq);
    let prevX = -Infinity;
    for (const ev of lane) {
      // Same-tick neighbors would overlap; nudge to keep program order visible.
      const x = Math.max(MARGIN_LEFT + ev.time * PX_PER_TICK, prevX + MIN_NODE_GAP);
      prevX = x;
      maxX = Math.max(maxX, x);
      const node: SceneNode = {
        no: ev.no,
        rank: ev.rank,
        x,
        y: laneY.get(ev.rank)!,
        color: routineColor(ev.routine),
        failed: ev.status === "failure",
        routine: ev.routine,
      };
      nodes.push(node);
      position.set(ev.no, node);
    }
  }

  const failedByNo = new Map(doc.events.map((ev) => [ev.no, ev.status === "failure"]));
  const edges: SceneEdge[] = [];
  const hasCommEdge = new Set<number>();
  for (const rel of doc.relations) {
    const a = position.get(rel.src)!;
    const b = position.get(rel.dst)!;
    if (rel.kind === "C") {
      hasCommEdge.add(rel.src);
      hasCommEdge.add(rel.dst);
    }
    edges.push({
      src: rel.src,
      dst: rel.dst,
      kind: rel.kind,
      dotted: failedByNo.get(rel.src)! || failedByNo.get(rel.dst)!,
      x1: a.x,
      y1: a.y,
      x2: b.x,
      y2: b.y,
    });
  }

  const stubs: SceneStub[] = [];
  for (const ev of doc.events) {
    if (ev.status !== "failure" || ev.kind === "calc" || hasCommEdge.has(ev.no)) {
      continue;
    }
    const node = position.get(ev.no)!;
    const partnerY =
      typeof ev.partner === "number" ? laneY.get(ev.partner) : undefined;
    let dy = 0;
    if (partnerY !== undefined && partnerY !== node.y) {
      dy = partnerY > node.y ? STUB_LENGTH : -STUB_LENGTH;
    }
    stubs.push({
      no: ev.no,
      x1: node.x,
      y1: node.y,
      x2: node.x + STUB_LENGTH,
      y2: node.y + dy,
    });
  }

  return {
    width: maxX + MARGIN_RIGHT,
    height: MARGIN_TOP * 2 + lanes.length * LANE_HEIGHT,
    lanes,
    nodes,
    edges,
    stubs,
  };
}
