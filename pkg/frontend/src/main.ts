// Entry point: a small start form (service URL, session, rater id) that hands
// off to the assignment loop.

import { RaterApi } from "./api.js";
import { RaterApp } from "./app.js";

function startForm(root: HTMLElement): void {
  root.innerHTML = `
    <h1>Plan rating</h1>
    <form class="start" data-testid="start-form">
      <label>Service URL
        <input name="base" type="text" value="" placeholder="same origin">
      </label>
      <label>Session id
        <input name="session" type="text" required placeholder="session-0001">
      </label>
      <label>Your rater id
        <input name="rater" type="text" required placeholder="anything memorable">
      </label>
      <button type="submit">Start rating</button>
    </form>
  `;
  const form = root.querySelector<HTMLFormElement>('[data-testid="start-form"]');
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const base = String(data.get("base") ?? "").replace(/\/$/, "");
    const session = String(data.get("session") ?? "").trim();
    const rater = String(data.get("rater") ?? "").trim();
    if (!session || !rater) {
      return;
    }
    const app = new RaterApp(new RaterApi(base, session), rater, root);
    void app.start();
  });
}

const mount = document.getElementById("app");
if (mount) {
  startForm(mount);
}
