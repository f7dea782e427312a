import { ApiClient } from "./api";
import { TaskSummaryOut } from "./types";

/** Open-task list with a claim button per row. */
export class TaskQueueScreen {
  onClaim: ((taskId: string) => void) | null = null;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
  ) {}

  async refresh(): Promise<void> {
    const { tasks } = await this.api.listOpenTasks();
    this.render(tasks);
  }

  private render(tasks: TaskSummaryOut[]): void {
    if (tasks.length === 0) {
      this.root.innerHTML = `<p class="queue-empty">No open tasks.</p>`;
      return;
    }
    const rows = tasks
      .map(
        (t) => `
        <li class="queue-row" data-task-id="${t.task_id}">
          <span class="q-query">${t.query_id}</span>
          <span class="q-remaining">${t.remaining} left</span>
          <button class="claim" data-task-id="${t.task_id}">Annotate</button>
        </li>`,
      )
      .join("");
    this.root.innerHTML = `<ul class="queue">${rows}</ul>`;
    this.root.querySelectorAll("button.claim").forEach((btn) => {
      btn.addEventListener("click", () => {
        const id = (btn as HTMLButtonElement).dataset.taskId!;
        if (this.onClaim) this.onClaim(id);
      });
    });
  }
}
