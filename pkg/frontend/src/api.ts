// Typed client for the verdict service. Every response passes through
// parseVerdict before anything else sees it, so values outside the API's
// closed classification set can never reach the page.

export const CLASSIFICATIONS = [
  "unknown",
  "fake_by_account_removal",
  "fake_at_birth",
  "fake_retroactive",
] as const;

export type Classification = (typeof CLASSIFICATIONS)[number];

export interface Verdict {
  infohash: string;
  classification: Classification;
  reason: string | null;
  flagged_at: string | null;
  publisher_username: string | null;
  publisher_ip: string | null;
}

export const VERDICT_FIELDS = [
  "infohash",
  "classification",
  "reason",
  "flagged_at",
  "publisher_username",
  "publisher_ip",
] as const;

export type VerdictField = (typeof VERDICT_FIELDS)[number];

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export class BadResponse extends Error {
  constructor(message: string) {
    super(message);
    this.name = "BadResponse";
  }
}

function stringOrNull(data: Record<string, unknown>, key: string): string | null {
  const value = data[key];
  if (value === null || typeof value === "string") {
    return value;
  }
  throw new BadResponse(`field ${key} is not a string or null`);
}

export function parseVerdict(data: unknown): Verdict {
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new BadResponse("verdict is not an object");
  }
  const record = data as Record<string, unknown>;
  for (const field of VERDICT_FIELDS) {
    if (!(field in record)) {
      throw new BadResponse(`verdict is missing ${field}`);
    }
  }
  const infohash = record["infohash"];
  if (typeof infohash !== "string" || !/^[0-9a-f]{40}$/.test(infohash)) {
    throw new BadResponse("infohash is not 40 hex characters");
  }
  const classification = record["classification"];
  if (!(CLASSIFICATIONS as readonly unknown[]).includes(classification)) {
    throw new BadResponse("classification is not one of the recognised kinds");
  }
  return {
    infohash,
    classification: classification as Classification,
    reason: stringOrNull(record, "reason"),
    flagged_at: stringOrNull(record, "flagged_at"),
    publisher_username: stringOrNull(record, "publisher_username"),
    publisher_ip: stringOrNull(record, "publisher_ip"),
  };
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
  ) {}

  verdictByHex(hex: string): Promise<Verdict> {
    return this.request(`/v1/verdict/${hex.toLowerCase()}`, { method: "GET" });
  }

  check(body: string | ArrayBuffer | Uint8Array): Promise<Verdict> {
    return this.request("/v1/check", { method: "POST", body: body as BodyInit });
  }

  private async request(path: string, init: RequestInit): Promise<Verdict> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, init);
    } catch (cause) {
      throw new NetworkError(`cannot reach the verdict service: ${String(cause)}`);
    }
    let data: unknown;
    try {
      data = await response.json();
    } catch {
      if (!response.ok) {
        throw new ApiError(response.status, "error", `service answered ${response.status}`);
      }
      throw new BadResponse("service answered with something that is not JSON");
    }
    if (!response.ok) {
      const record = (typeof data === "object" && data !== null ? data : {}) as Record<
        string,
        unknown
      >;
      const code = typeof record["error"] === "string" ? (record["error"] as string) : "error";
      const detail =
        typeof record["detail"] === "string"
          ? (record["detail"] as string)
          : `service answered ${response.status}`;
      throw new ApiError(response.status, code, detail);
    }
    return parseVerdict(data);
  }
}
