import { ApiClient, ServiceError } from "./api";
import { renderPosteriorChart } from "./chart";
import { EventOut, Outcome, PosteriorOut, RecordOut, ReferenceOut, TaskOut } from "./types";

/**
 * One annotation session: the query face next to the current reference,
 * older/younger controls, the live posterior chart, and finalize.
 *
 * Judgments are strictly serialized: controls lock while a submission is in
 * flight, a reference already judged can never be submitted again, and the
 * service's own out-of-order rejection is surfaced if it ever fires anyway.
 */
export class ComparisonScreen {
  private task: TaskOut | null = null;
  private currentRef: ReferenceOut | null = null;
  private judged = new Set<string>();
  private inFlight = false;
  private record: RecordOut | null = null;
  private errorText = "";

  // live display state, always verbatim from the last service response
  private posterior: PosteriorOut | null = null;
  private mode = 0;
  private ci90: number[] = [0, 0];
  private remaining = 0;
  private events: EventOut[] = [];

  onFinished: (() => void) | null = null;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
    private annotatorId: string,
  ) {}

  async load(taskId: string): Promise<void> {
    this.task = await this.api.getTask(taskId);
    this.posterior = this.task.posterior;
    this.mode = this.task.mode;
    this.ci90 = this.task.ci90;
    this.remaining = this.task.remaining;
    this.events = this.task.events;
    this.judged = new Set(this.task.events.map((e) => e.ref_id));
    this.record = null;
    this.errorText = "";
    if (this.task.status === "open") {
      await this.advance();
    } else {
      this.currentRef = null;
    }
    this.render();
  }

  private async advance(): Promise<void> {
    const next = await this.api.nextReference(this.task!.task_id);
    this.currentRef = next.exhausted ? null : next.reference;
  }

  canJudge(): boolean {
    return (
      !this.inFlight &&
      this.task !== null &&
      this.task.status === "open" &&
      this.record === null &&
      this.currentRef !== null &&
      !this.judged.has(this.currentRef.id)
    );
  }

  async judge(outcome: Outcome): Promise<void> {
    if (!this.canJudge()) return;
    const ref = this.currentRef!;
    this.inFlight = true;
    this.render();
    try {
      const resp = await this.api.submitComparison(
        this.task!.task_id,
        ref.id,
        outcome,
        this.annotatorId,
      );
      this.judged.add(ref.id);
      this.posterior = resp.posterior;
      this.mode = resp.mode;
      this.ci90 = resp.ci90;
      this.remaining = resp.remaining;
      this.events = this.events.concat([
        {
          ref_id: ref.id,
          ref_age: ref.age,
          outcome,
          annotator_id: this.annotatorId,
          timestamp: 0,
        },
      ]);
      this.errorText = "";
      await this.advance();
    } catch (err) {
      this.errorText = err instanceof ServiceError ? `${err.code}: ${err.detail}` : String(err);
      if (err instanceof ServiceError && err.code === "out_of_order_reference") {
        await this.advance(); // resync with the service's view of the queue
      }
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  async finalize(): Promise<void> {
    if (this.inFlight || this.task === null || this.record !== null) return;
    if (this.remaining > 0) return;
    this.inFlight = true;
    this.render();
    try {
      this.record = await this.api.finalizeTask(this.task.task_id);
      this.posterior = this.record.posterior;
      this.mode = this.record.mode;
      this.ci90 = this.record.ci90;
      this.errorText = "";
      if (this.onFinished) this.onFinished();
    } catch (err) {
      this.errorText = err instanceof ServiceError ? `${err.code}: ${err.detail}` : String(err);
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  handleKey(event: KeyboardEvent): void {
    if (event.key === "ArrowLeft") void this.judge("younger");
    if (event.key === "ArrowRight") void this.judge("older");
  }

  private render(): void {
    if (this.task === null) {
      this.root.innerHTML = "<p>No task loaded.</p>";
      return;
    }
    const judging = this.canJudge();
    const done = this.record !== null || this.task.status !== "open";
    const status = this.record?.status ?? this.task.status;
    const discarded = status === "discarded";

    const refCell = this.currentRef
      ? `<figure class="face">
           <img alt="reference face" src="${this.currentRef.image_uri}">
           <figcaption>reference · ${this.currentRef.age} yrs</figcaption>
         </figure>`
      : `<figure class="face face-empty"><figcaption>no reference pending</figcaption></figure>`;

    this.root.innerHTML = `
      <section class="comparison">
        <div class="status-line">
          <span class="task-id">${this.task.task_id}</span>
          <span class="remaining" data-remaining="${this.remaining}">
            ${this.remaining} comparison(s) left
          </span>
          <span class="summary">mode <b data-mode>${this.mode}</b>,
            90% interval <b data-ci>${this.ci90[0]}&ndash;${this.ci90[1]}</b></span>
        </div>
        ${this.errorText ? `<div class="error" role="alert">${this.errorText}</div>` : ""}
        ${
          done
            ? `<div class="outcome ${discarded ? "outcome-discarded" : "outcome-labelled"}">
                 ${
                   discarded
                     ? "Discarded as outlier: the 90% interval is wider than 15 years."
                     : `Labelled: estimated age ${this.mode}.`
                 }
               </div>`
            : ""
        }
        <div class="faces">
          <figure class="face">
            <img alt="query face" src="${this.task.query.image_uri}">
            <figcaption>query · ${this.task.query.id}</figcaption>
          </figure>
          ${refCell}
        </div>
        <div class="controls">
          <button class="judge-younger" ${judging ? "" : "disabled"}>
            &larr; Younger
          </button>
          <button class="judge-older" ${judging ? "" : "disabled"}>
            Older &rarr;
          </button>
          <button class="finalize"
            ${this.remaining === 0 && !done && !this.inFlight ? "" : "disabled"}>
            Finalize
          </button>
        </div>
        <div class="chart-holder"></div>
        <p class="hint">keys: &larr; younger &middot; &rarr; older</p>
      </section>`;

    this.root.querySelector(".judge-younger")!.addEventListener("click", () => {
      void this.judge("younger");
    });
    this.root.querySelector(".judge-older")!.addEventListener("click", () => {
      void this.judge("older");
    });
    this.root.querySelector(".finalize")!.addEventListener("click", () => {
      void this.finalize();
    });
    if (this.posterior) {
      renderPosteriorChart(this.root.querySelector(".chart-holder") as HTMLElement, {
        posterior: this.posterior,
        ci90: this.ci90,
        events: this.events,
        mode: this.mode,
      });
    }
  }
}
