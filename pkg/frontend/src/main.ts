import { App } from "./app.js";

function bootstrap(): void {
  const root = document.querySelector<HTMLElement>("#app");
  if (!root) return;
  const app = new App(root);
  void app.loadMeta();

  const form = root.querySelector<HTMLFormElement>(".start-form");
  const textarea = root.querySelector<HTMLTextAreaElement>(".text-input");
  const labelSelect = root.querySelector<HTMLSelectElement>(".label-select");
  const submit = root.querySelector<HTMLButtonElement>(".start-button");
  if (!form || !textarea || !labelSelect || !submit) return;

  const syncSubmit = () => {
    submit.disabled = textarea.value.trim().length === 0;
  };
  textarea.addEventListener("input", syncSubmit);
  syncSubmit();

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (textarea.value.trim().length === 0) return;
    void app.startSession(textarea.value, labelSelect.value);
  });
}

document.addEventListener("DOMContentLoaded", bootstrap);
