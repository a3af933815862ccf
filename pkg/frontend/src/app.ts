/**
 * Controller: owns the console state, talks to the service through
 * ApiClient, re-renders the three panes (queue, stepper, what-if) after
 * every action.  One PUT per evidence field, so partial progress is on the
 * server the moment it is saved.
 *
 * Error handling per the service contract: 409 shows a reload prompt, 422
 * lands inline on the offending field, a dead socket raises the
 * connectivity banner, and everything else becomes a plain error banner.
 */

import { ApiClient, ApiError, UNREACHABLE } from './api.js';
import type {
  Assessment,
  EvidenceField,
  Mandate,
  Ownership,
  QueueEntry,
  SampledPublication,
  WhatifResponse,
} from './types.js';
import { currentStep, overlapPreview } from './stepper.js';
import {
  StepperDraft,
  emptyDraft,
  renderBanner,
  renderQueue,
  renderStepper,
  renderWhatif,
} from './views.js';

interface Banner {
  kind: 'error' | 'conflict' | 'info';
  message: string;
}

export class Controller {
  private client: ApiClient;
  private university: string;
  private root: HTMLElement;

  private queueEntries: QueueEntry[] = [];
  private assessment: Assessment | null = null;
  private acks = new Set<1 | 2 | 3>();
  private draft: StepperDraft | null = null;
  private samplePubs: SampledPublication[] = [];
  private verdicts = new Map<string, boolean>();
  private whatif: WhatifResponse | null = null;
  private whatifStale = false;
  private errors = new Map<string, string>();
  private banner: Banner | null = null;

  constructor(client: ApiClient, university: string, root: HTMLElement) {
    this.client = client;
    this.university = university;
    this.root = root;
  }

  async init(): Promise<void> {
    this.root.innerHTML = `<div data-pane="banner"></div>
<div class="layout">
  <nav data-pane="queue"></nav>
  <main data-pane="stepper"></main>
  <div data-pane="whatif"></div>
</div>`;
    this.root.addEventListener('click', (event) => void this.onClick(event));
    this.root.addEventListener('change', (event) => void this.onChange(event));
    this.root.addEventListener('input', (event) => this.onInput(event));
    await this.loadQueue();
    this.render();
  }

  private pane(name: string): HTMLElement {
    const el = this.root.querySelector<HTMLElement>(`[data-pane="${name}"]`);
    if (!el) throw new Error(`missing pane ${name}`);
    return el;
  }

  render(): void {
    this.pane('banner').innerHTML = this.banner
      ? renderBanner(this.banner.kind, this.banner.message)
      : '';
    this.pane('queue').innerHTML = renderQueue(
      this.queueEntries,
      this.assessment ? this.assessment.hospital : null,
    );
    if (this.assessment && this.draft) {
      this.pane('stepper').innerHTML = renderStepper(
        this.assessment,
        currentStep(this.assessment, this.acks),
        this.acks,
        this.draft,
        this.samplePubs,
        this.verdicts,
        overlapPreview(this.verdicts),
        this.errors,
      );
    } else {
      this.pane('stepper').innerHTML = '<p class="stepper-empty">Pick a hospital from the queue.</p>';
    }
    this.pane('whatif').innerHTML = renderWhatif(this.whatif, this.whatifStale);
  }

  private fail(err: unknown, field?: string): void {
    if (!(err instanceof ApiError)) throw err;
    if (err.status === UNREACHABLE) {
      this.banner = { kind: 'error', message: 'Service unreachable. Check the connection and retry.' };
    } else if (err.status === 409) {
      this.banner = {
        kind: 'conflict',
        message: 'Someone else changed this assessment. Reload to continue.',
      };
    } else if (err.status === 422 && field) {
      this.errors.set(field, err.message);
    } else if (err.status === 401) {
      this.banner = { kind: 'error', message: `Session problem (${err.code}). Reconnect to continue.` };
    } else {
      this.banner = { kind: 'error', message: `${err.code}: ${err.message}` };
    }
  }

  async loadQueue(): Promise<void> {
    try {
      this.queueEntries = (await this.client.queue()).entries;
      if (this.banner?.kind === 'error') this.banner = null;
    } catch (err) {
      this.fail(err);
    }
  }

  /** Refetch the figures after every save; on failure keep the last
   * numbers and flag them stale instead of showing nothing. */
  async refreshWhatif(): Promise<void> {
    if (!this.assessment) return;
    try {
      const { data } = await this.client.whatif(this.university, this.assessment.hospital);
      this.whatif = data;
      this.whatifStale = false;
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      this.whatifStale = true;
    }
  }

  async open(hospital: string): Promise<void> {
    try {
      this.assessment = await this.client.assessment(hospital, this.university);
    } catch (err) {
      this.fail(err);
      this.render();
      return;
    }
    this.acks = new Set();
    this.draft = emptyDraft(this.assessment.dossier);
    this.samplePubs = this.stubSample(this.assessment);
    this.verdicts = new Map();
    this.errors = new Map();
    this.banner = null;
    await this.refreshWhatif();
    this.render();
  }

  /** A reopened assessment knows which ids were sampled but the service
   * does not resend addresses; redraw with the same seed to review them. */
  private stubSample(assessment: Assessment): SampledPublication[] {
    if (!assessment.sample) return [];
    return assessment.sample.publication_ids.map((id) => ({
      id,
      year: 0,
      doctype: '',
      addresses: [],
    }));
  }

  private async applied(next: Assessment): Promise<void> {
    this.assessment = next;
    await this.refreshWhatif();
  }

  async saveEvidence(
    field: EvidenceField,
    value: Ownership | Mandate | number | boolean | null,
    citation: string,
  ): Promise<void> {
    if (!this.assessment) return;
    const unknownish = value === 'unknown' || value === null;
    if (!unknownish && citation.trim() === '') {
      this.errors.set(field, 'A source citation is required before saving.');
      this.render();
      return;
    }
    this.errors.delete(field);
    try {
      const next = await this.client.putEvidence(this.assessment.hospital, this.university, {
        version: this.assessment.version,
        field,
        value,
        source: unknownish
          ? null
          : { citation: citation.trim(), retrieved_at: new Date().toISOString() },
      });
      await this.applied(next);
    } catch (err) {
      this.fail(err, field);
    }
    this.render();
  }

  async markUnknown(step: 1 | 2 | 3): Promise<void> {
    if (!this.assessment || !this.draft) return;
    const dossier = this.assessment.dossier;
    if (step === 1 && dossier.ownership !== 'unknown') {
      this.draft.ownership = 'unknown';
      await this.saveEvidence('ownership', 'unknown', '');
    } else if (step === 2 && dossier.mandate !== 'unknown') {
      this.draft.mandate = 'unknown';
      await this.saveEvidence('mandate', 'unknown', '');
    } else if (step === 3 && dossier.colocation_share !== null) {
      this.draft.colocation = '';
      await this.saveEvidence('colocation_share', null, '');
    }
    this.acks.add(step);
    this.render();
  }

  async drawSample(): Promise<void> {
    if (!this.assessment || !this.draft) return;
    const n = Number.parseInt(this.draft.sampleN, 10);
    const seed = Number.parseInt(this.draft.sampleSeed, 10);
    if (!Number.isFinite(n) || n < 1 || !Number.isFinite(seed)) {
      this.errors.set('sample', 'Sample size and seed must be integers (size at least 1).');
      this.render();
      return;
    }
    this.errors.delete('sample');
    try {
      const next = await this.client.drawSample(this.assessment.hospital, this.university, {
        version: this.assessment.version,
        n,
        seed,
      });
      this.samplePubs = next.publications;
      this.verdicts = new Map();
      await this.applied(next);
    } catch (err) {
      this.fail(err, 'sample');
    }
    this.render();
  }

  async saveVerdicts(): Promise<void> {
    if (!this.assessment || this.verdicts.size === 0) return;
    this.errors.delete('verdicts');
    try {
      const next = await this.client.recordVerdicts(this.assessment.hospital, this.university, {
        version: this.assessment.version,
        verdicts: [...this.verdicts.entries()],
      });
      await this.applied(next);
    } catch (err) {
      this.fail(err, 'verdicts');
    }
    this.render();
  }

  async classify(): Promise<void> {
    if (!this.assessment) return;
    this.errors.delete('commit');
    try {
      const next = await this.client.classify(this.assessment.hospital, this.university, this.assessment.version);
      await this.applied(next);
      await this.loadQueue();
    } catch (err) {
      this.fail(err, 'commit');
    }
    this.render();
  }

  async applyOverride(verdict: string, justification: string): Promise<void> {
    if (!this.assessment) return;
    if (verdict === '' || justification.trim() === '') {
      this.errors.set('override', 'Pick a verdict and give a justification.');
      this.render();
      return;
    }
    this.errors.delete('override');
    try {
      const next = await this.client.override(this.assessment.hospital, this.university, {
        version: this.assessment.version,
        verdict,
        justification: justification.trim(),
      });
      await this.applied(next);
      await this.loadQueue();
    } catch (err) {
      this.fail(err, 'override');
    }
    this.render();
  }

  async reload(): Promise<void> {
    if (!this.assessment) return;
    this.banner = null;
    this.errors = new Map();
    this.acks = new Set();
    await this.loadQueue();
    await this.open(this.assessment.hospital);
  }

  // ---- event wiring ----

  private async onClick(event: Event): Promise<void> {
    const target = event.target as HTMLElement | null;
    const actionEl = target?.closest<HTMLElement>('[data-action]');
    if (!actionEl || !this.root.contains(actionEl)) return;
    const action = actionEl.dataset.action;

    if (action === 'open') {
      const hospital = actionEl.dataset.hospital;
      if (hospital) await this.open(hospital);
      return;
    }
    if (action === 'reload') return this.reload();
    if (!this.draft) return;

    switch (action) {
      case 'save-ownership':
        return this.saveEvidence('ownership', this.draft.ownership, this.draft.ownershipCitation);
      case 'save-mandate':
        return this.saveEvidence('mandate', this.draft.mandate, this.draft.mandateCitation);
      case 'save-colocation': {
        const share = Number.parseFloat(this.draft.colocation);
        if (!Number.isFinite(share)) {
          this.errors.set('colocation_share', 'Enter a share between 0 and 1.');
          this.render();
          return;
        }
        return this.saveEvidence('colocation_share', share, this.draft.colocationCitation);
      }
      case 'draw-sample':
        return this.drawSample();
      case 'save-verdicts':
        return this.saveVerdicts();
      case 'classify':
        return this.classify();
      case 'mark-unknown': {
        const step = Number(actionEl.dataset.step);
        if (step === 1 || step === 2 || step === 3) await this.markUnknown(step);
        return;
      }
      case 'apply-override': {
        const picked = this.root.querySelector<HTMLInputElement>(
          'input[name="override-verdict"]:checked',
        );
        const justification =
          this.root.querySelector<HTMLTextAreaElement>('[data-role="override-justification"]')
            ?.value ?? '';
        return this.applyOverride(picked?.value ?? '', justification);
      }
    }
  }

  private async onChange(event: Event): Promise<void> {
    const input = event.target as HTMLInputElement | null;
    if (!input || !this.draft) return;
    if (input.name === 'ownership') {
      this.draft.ownership = input.value as Ownership;
      this.render();
    } else if (input.name === 'mandate') {
      this.draft.mandate = input.value as Mandate;
      this.render();
    } else if (input.dataset.action === 'toggle-verdict') {
      const row = input.closest<HTMLElement>('[data-pub]');
      if (row?.dataset.pub) {
        this.verdicts.set(row.dataset.pub, input.value === 'yes');
        this.render();
      }
    }
  }

  /** Keystroke updates go into the draft without re-rendering, so typing
   * in a citation box does not lose focus. */
  private onInput(event: Event): void {
    const input = event.target as HTMLInputElement | null;
    if (!input || !this.draft) return;
    const citationFor = input.dataset.citation;
    if (citationFor === 'ownership') this.draft.ownershipCitation = input.value;
    else if (citationFor === 'mandate') this.draft.mandateCitation = input.value;
    else if (citationFor === 'colocation_share') this.draft.colocationCitation = input.value;
    else if (input.dataset.role === 'colocation') this.draft.colocation = input.value;
    else if (input.dataset.role === 'sample-n') this.draft.sampleN = input.value;
    else if (input.dataset.role === 'sample-seed') this.draft.sampleSeed = input.value;
  }
}
