import { ApiClient, ApiError } from './api.js';
import { Controller } from './app.js';

function el<T extends HTMLElement>(selector: string): T {
  const found = document.querySelector<T>(selector);
  if (!found) throw new Error(`missing element ${selector}`);
  return found;
}

const form = el<HTMLFormElement>('#connect');
const status = el<HTMLElement>('#connect-status');

form.addEventListener('submit', (event) => {
  event.preventDefault();
  void (async () => {
    const base = el<HTMLInputElement>('#service-base').value.trim();
    const assessor = el<HTMLInputElement>('#assessor').value.trim();
    const university = el<HTMLInputElement>('#university').value.trim();
    if (!base || !assessor || !university) {
      status.textContent = 'Service URL, assessor name, and university id are all required.';
      return;
    }
    const client = new ApiClient(base);
    try {
      const session = await client.openSession(assessor);
      status.textContent = `Connected as ${session.assessor} (session until ${session.expires_at}).`;
    } catch (err) {
      status.textContent =
        err instanceof ApiError ? `Could not connect: ${err.message}` : String(err);
      return;
    }
    form.hidden = true;
    await new Controller(client, university, el('#app')).init();
  })();
});
