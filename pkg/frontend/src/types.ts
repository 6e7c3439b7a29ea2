/** API payload shapes (mirrors docs/protocols.md in the repo root). */

export interface SessionCreated {
  session_id: string;
  root_uri: string;
  head_uri: string;
  config: Record<string, unknown>;
}

export interface SessionInfo {
  session_id: string;
  head_uri: string;
  status: string;
  n_turns: number;
  config: Record<string, unknown>;
}

export interface GraphNode {
  uri: string;
  description: string;
  parent_uri: string | null;
  transformation_type: string;
  created_at: number;
}

export interface ActionRecord {
  turn_index: number;
  intent: string;
  key_image_uris: string[];
}

export interface GraphPayload {
  head_uri: string;
  nodes: GraphNode[];
  actions: ActionRecord[];
}

export type TurnStatus = 'committed' | 'rolled_back' | 'failed';

export interface TurnOutcome {
  status: TurnStatus;
  attempts: number;
  final_uri: string;
  failing: [string, string][];
  error: string | null;
  action?: ActionRecord;
}

export interface TurnScore {
  turn_index: number;
  if_score: number;
  ic_score: number;
  psnr_om: number;
  ssim_om: number;
  mask_coverage: number;
  perceptual_om: number | null;
  perceptual_name: string | null;
  drift_from_root: number | null;
}

export interface MetricsPayload {
  turns: TurnScore[];
}

export interface ApiErrorBody {
  error: { code: string; message: string; fields?: Record<string, string> };
}
