// Service base URL resolution, in priority order: injected global, ?service=
// query parameter, then the default local address.
export function serviceBaseUrl(): string {
  const injected = (window as { AGEPOST_SERVICE_URL?: string }).AGEPOST_SERVICE_URL;
  if (injected) return injected.replace(/\/+$/, "");
  const param = new URLSearchParams(window.location.search).get("service");
  if (param) return param.replace(/\/+$/, "");
  return "http://127.0.0.1:8000";
}
