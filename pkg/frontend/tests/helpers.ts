import { readFileSync } from 'node:fs';

export function fixture<T>(name: string): T {
  // Compiled tests run from dist/tests/; fixtures stay in the source tree.
  const url = new URL(`../../tests/fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, 'utf-8')) as T;
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

/** Scripted fetch: shifts queued (status, body) responses, records calls. */
export function scriptedFetch(script: Array<[number, unknown]>) {
  const calls: RecordedCall[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url,
      method: init?.method ?? 'GET',
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    });
    const next = script.shift();
    if (!next) {
      throw new Error(`no scripted response for ${url}`);
    }
    const [status, body] = next;
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'Content-Type': 'application/json' },
    });
  };
  return { fetchFn, calls };
}
