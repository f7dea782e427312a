// Mirrors the annotation service response schemas exactly. The UI never
// derives probabilities itself; every number shown comes from these payloads.

export interface PosteriorOut {
  min_age: number;
  max_age: number;
  mass: number[];
}

export interface ReferenceOut {
  id: string;
  image_uri: string;
  age: number;
  gender: string;
}

export interface EventOut {
  ref_id: string;
  ref_age: number;
  outcome: string;
  annotator_id: string;
  timestamp: number;
}

export interface QueryOut {
  id: string;
  image_uri: string;
  gender: string;
  rough_age_hint: number | null;
}

export interface TaskOut {
  task_id: string;
  status: string;
  query: QueryOut;
  posterior: PosteriorOut;
  mode: number;
  ci90: number[];
  remaining: number;
  current_ref: ReferenceOut | null;
  events: EventOut[];
  created_at: number;
  updated_at: number;
}

export interface ComparisonOut {
  posterior: PosteriorOut;
  mode: number;
  ci90: number[];
  remaining: number;
}

export interface RecordOut {
  query_id: string;
  posterior: PosteriorOut;
  mode: number;
  ci90: number[];
  events: EventOut[];
  status: string;
}

export interface NextOut {
  exhausted: boolean;
  reference: ReferenceOut | null;
}

export interface TaskSummaryOut {
  task_id: string;
  query_id: string;
  status: string;
  remaining: number;
  created_at: number;
}

export type Outcome = "older" | "younger";
