import { ApiClient } from "./api";
import { ComparisonScreen } from "./comparison";
import { serviceBaseUrl } from "./config";
import { TaskQueueScreen } from "./queue";

function annotatorId(): string {
  const key = "agepost-annotator-id";
  let id = window.localStorage.getItem(key);
  if (!id) {
    id = `annotator-${Math.random().toString(36).slice(2, 10)}`;
    window.localStorage.setItem(key, id);
  }
  return id;
}

export function bootstrap(root: HTMLElement): void {
  const api = new ApiClient(serviceBaseUrl());
  root.innerHTML = `
    <header><h1>agepost annotation</h1></header>
    <main>
      <aside id="queue"></aside>
      <section id="work"></section>
    </main>`;

  const queue = new TaskQueueScreen(api, root.querySelector("#queue") as HTMLElement);
  const screen = new ComparisonScreen(
    api,
    root.querySelector("#work") as HTMLElement,
    annotatorId(),
  );
  screen.onFinished = () => void queue.refresh();
  queue.onClaim = (taskId) => void screen.load(taskId);

  window.addEventListener("keydown", (e) => screen.handleKey(e));
  void queue.refresh();
  window.setInterval(() => void queue.refresh(), 5000);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrap(document.getElementById("app") as HTMLElement);
}
