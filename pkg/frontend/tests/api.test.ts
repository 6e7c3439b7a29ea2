import assert from 'node:assert/strict';
import { test } from 'node:test';

import { ApiError, SessionApi } from '../src/api.js';
import type { GraphPayload, SessionCreated, TurnOutcome } from '../src/types.js';
import { fixture, scriptedFetch } from './helpers.js';

test('createSession posts config and seed to /sessions', async () => {
  const created = fixture<SessionCreated>('created');
  const { fetchFn, calls } = scriptedFetch([[200, created]]);
  const api = new SessionApi('http://svc:1/', fetchFn);
  const result = await api.createSession({ config: { backend: 'symbolic' }, seed: 7 });
  assert.equal(result.session_id, created.session_id);
  assert.equal(calls.length, 1);
  assert.equal(calls[0]!.url, 'http://svc:1/sessions');
  assert.equal(calls[0]!.method, 'POST');
  assert.deepEqual(calls[0]!.body, { config: { backend: 'symbolic' }, seed: 7 });
});

test('runTurn includes dsl only when provided', async () => {
  const outcome = fixture<TurnOutcome>('turn_committed');
  const { fetchFn, calls } = scriptedFetch([[200, outcome], [200, outcome]]);
  const api = new SessionApi('http://svc:1', fetchFn);
  await api.runTurn('session-0001', 'make it green', 'adjust(drum, color=green)');
  await api.runTurn('session-0001', 'make it green');
  assert.deepEqual(calls[0]!.body, {
    instruction: 'make it green',
    dsl: 'adjust(drum, color=green)',
  });
  assert.deepEqual(calls[1]!.body, { instruction: 'make it green' });
  assert.equal(calls[0]!.url, 'http://svc:1/sessions/session-0001/turns');
});

test('graph and metrics round payloads through untouched', async () => {
  const graph = fixture<GraphPayload>('graph');
  const metrics = fixture<unknown>('metrics');
  const { fetchFn } = scriptedFetch([[200, graph], [200, metrics]]);
  const api = new SessionApi('http://svc:1', fetchFn);
  assert.deepEqual(await api.getGraph('s'), graph);
  assert.deepEqual(await api.getMetrics('s'), metrics);
});

test('busy responses surface as ApiError with isBusy', async () => {
  const { fetchFn } = scriptedFetch([
    [409, { error: { code: 'busy', message: 'a turn is already in flight' } }],
  ]);
  const api = new SessionApi('http://svc:1', fetchFn);
  await assert.rejects(
    () => api.runTurn('s', 'x'),
    (error: unknown) => error instanceof ApiError && error.isBusy,
  );
});

test('not-found error carries code and message from the payload', async () => {
  const body = fixture<{ error: { code: string; message: string } }>('not_found');
  const { fetchFn } = scriptedFetch([[404, body]]);
  const api = new SessionApi('http://svc:1', fetchFn);
  try {
    await api.getSession('ghost');
    assert.fail('expected ApiError');
  } catch (error) {
    assert.ok(error instanceof ApiError);
    assert.equal(error.code, body.error.code);
    assert.equal(error.message, body.error.message);
  }
});

test('imageUrl builds immutable image URLs', () => {
  const api = new SessionApi('http://svc:1/');
  assert.equal(api.imageUrl('img-abc'), 'http://svc:1/images/img-abc');
});

test('undo posts target_uri only when given', async () => {
  const { fetchFn, calls } = scriptedFetch([
    [200, { head_uri: 'img-a' }],
    [200, { head_uri: 'img-b' }],
  ]);
  const api = new SessionApi('http://svc:1', fetchFn);
  await api.undo('s');
  await api.undo('s', 'img-b');
  assert.deepEqual(calls[0]!.body, {});
  assert.deepEqual(calls[1]!.body, { target_uri: 'img-b' });
});
