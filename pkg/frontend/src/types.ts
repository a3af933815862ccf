/**
 * Wire types for the assessment service (/v1).  Everything here mirrors
 * what the service actually sends; count figures stay strings because the
 * console must display them untouched.
 */

export type Scheme = 'full' | 'fractional';

export type QueueStatus = 'pending' | 'in_progress' | 'decided';

export type Ownership =
  | 'university'
  | 'university_related_foundation'
  | 'university_health_system'
  | 'reverse_ownership'
  | 'government_health_authority'
  | 'independent_foundation'
  | 'private'
  | 'unknown';

export type Mandate =
  | 'core_curriculum'
  | 'specialist_or_continuing_only'
  | 'patient_education_only'
  | 'none_documented'
  | 'unknown';

/** Ownership values that settle the pair as component at step 1. */
export const TERMINAL_OWNERSHIP: ReadonlySet<Ownership> = new Set([
  'university',
  'university_related_foundation',
  'university_health_system',
  'reverse_ownership',
]);

export interface SessionInfo {
  token: string;
  assessor: string;
  expires_at: string;
}

export interface QueueEntry {
  hospital: string;
  label: string;
  standalone_output: string;
  status: QueueStatus;
}

export interface SourceEntry {
  field: string;
  citation: string;
  retrieved_at: string;
}

export interface AuthorOverlap {
  fraction: number;
  sample_size: number;
}

export interface Dossier {
  hospital: string;
  university: string;
  window: [number, number];
  ownership: Ownership;
  mandate: Mandate;
  colocation_share: number | null;
  author_overlap: AuthorOverlap | null;
  research_active: boolean;
  sources: SourceEntry[];
}

export interface StepOutcome {
  step: number;
  verdict: string;
  rationale: string;
}

export interface OverrideRecord {
  verdict: string;
  justification: string;
  assessor: string;
  at: string;
}

export interface Classification {
  hospital: string;
  university: string;
  verdict: string;
  trail: StepOutcome[];
  dossier: Dossier;
  assessor: string;
  decided_at: string;
  override: OverrideRecord | null;
}

export interface Assessment {
  hospital: string;
  university: string;
  window: [number, number];
  dossier: Dossier;
  sample: { seed: number | null; publication_ids: string[] } | null;
  classification: Classification | null;
  version: number;
  status: QueueStatus;
}

export interface SampledPublication {
  id: string;
  year: number;
  doctype: string;
  addresses: string[];
}

export interface SampleResponse extends Assessment {
  publications: SampledPublication[];
}

/** Formatted count strings, displayed exactly as received. */
export interface WhatifFigures {
  separate: string;
  marginal: string;
  combined: string;
  pct_share: string;
}

export interface WhatifResponse {
  university: string;
  university_label: string;
  hospital: string;
  hospital_label: string;
  scheme: Scheme;
  window: string;
  component: WhatifFigures;
  associate: WhatifFigures;
}

export interface DeltaTableRow {
  organization: string;
  separate: string;
  combined: string;
  percentage: string;
}

export interface DeltaTableResponse {
  rows: DeltaTableRow[];
  scheme: Scheme;
  window: string;
}

export type EvidenceField = 'ownership' | 'mandate' | 'colocation_share' | 'research_active';

export interface EvidencePayload {
  version: number;
  field: EvidenceField;
  value: Ownership | Mandate | number | boolean | null;
  source: { citation: string; retrieved_at: string } | null;
}
