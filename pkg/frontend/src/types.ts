/** Shapes of the orchestrator API bodies the panel consumes. */

export interface TileBlock {
  number: number;
  hash: string;
  color: string;
}

export interface NodeStatus {
  node_id: string;
  head_hash: string | null;
  head_number: number;
  sync_state: string;
  peer_count: number;
  last_two: TileBlock[];
}

export interface Snapshot {
  run_id: string;
  status: string;
  t_ms: number;
  nodes: NodeStatus[];
  consensus: boolean;
  error?: string | null;
}

export interface FractionValue {
  num: number;
  den: number;
  value: number;
}

export interface MetricsReport {
  mainchain_rate: FractionValue;
  branching_ratio: FractionValue;
  contribution_ratio: Record<string, FractionValue>;
  initial_consensus: Record<string, number | "not-achieved">;
  counts: {
    total_blocks: number;
    mainchain_blocks: number;
    offchain_blocks: number;
    detached_blocks: number;
  };
  attribution_complete: boolean;
}

export interface RunListEntry {
  run_id: string;
  name: string;
  status: string;
  mode: string;
  n: number;
}

export type Edge = [number, number];
