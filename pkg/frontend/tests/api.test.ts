import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { apiStub, json } from "./fixtures.js";

describe("ApiClient", () => {
  it("fetches roles from /v1/roles", async () => {
    const { fetchFn, calls } = apiStub();
    const client = new ApiClient({ fetchFn });
    const roles = await client.roles();
    expect(roles).toHaveLength(5);
    expect(roles[0]?.role).toBe("Consumer");
    expect(calls).toEqual([
      expect.objectContaining({ url: "/v1/roles", method: "GET" }),
    ]);
  });

  it("fetches retrievers from /v1/retrievers", async () => {
    const { fetchFn } = apiStub();
    const client = new ApiClient({ fetchFn });
    const retrievers = await client.retrievers();
    expect(retrievers.map((r) => r.dataset_id)).toEqual([
      "variot_vulnerabilities",
      "variot_exploits",
      "mitre_attack_ics",
      "threat_reports",
      "cls",
    ]);
  });

  it("posts role and query to /v1/query", async () => {
    const { fetchFn, calls } = apiStub();
    const client = new ApiClient({ fetchFn });
    const resp = await client.query("Consumer", "Is my camera safe?");
    expect(resp.role).toBe("Consumer");
    expect(resp.query).toBe("Is my camera safe?");
    expect(resp.evidence).toHaveLength(5);
    expect(calls[0]?.method).toBe("POST");
    expect(calls[0]?.body).toEqual({ role: "Consumer", query: "Is my camera safe?" });
  });

  it("prefixes a configured base URL and strips trailing slashes", async () => {
    const { fetchFn, calls } = apiStub();
    const client = new ApiClient({ baseUrl: "http://api.example:8000/", fetchFn });
    await client.health();
    expect(calls[0]?.url).toBe("http://api.example:8000/v1/health");
  });

  it("sends a bearer token when configured", async () => {
    const { fetchFn, calls } = apiStub();
    const client = new ApiClient({ token: "sekrit", fetchFn });
    await client.health();
    expect(calls[0]?.headers.Authorization).toBe("Bearer sekrit");
  });

  it("omits the Authorization header without a token", async () => {
    const { fetchFn, calls } = apiStub();
    const client = new ApiClient({ fetchFn });
    await client.health();
    expect(calls[0]?.headers.Authorization).toBeUndefined();
  });

  it("raises ApiError with the server's detail on a 4xx", async () => {
    const { fetchFn } = apiStub({
      "POST /v1/query": () => json({ detail: "unknown role: Wizard" }, 400),
    });
    const client = new ApiClient({ fetchFn });
    const err = await client.query("Wizard", "hi").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(400);
    expect((err as ApiError).message).toBe("unknown role: Wizard");
  });

  it("falls back to the status code when the error body is not JSON", async () => {
    const { fetchFn } = apiStub({
      "GET /v1/health": () => new Response("<html>bad gateway</html>", { status: 502 }),
    });
    const client = new ApiClient({ fetchFn });
    const err = await client.health().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(502);
    expect((err as ApiError).message).toBe("HTTP 502");
  });

  it("talks only to /v1 paths", async () => {
    const { fetchFn, calls } = apiStub();
    const client = new ApiClient({ fetchFn });
    await client.health();
    await client.roles();
    await client.retrievers();
    await client.query("Consumer", "q");
    expect(calls.length).toBe(4);
    for (const call of calls) {
      expect(call.url.startsWith("/v1/")).toBe(true);
    }
  });
});
