// Client-side routing of pasted text. This only decides which endpoint to
// call and rejects obviously broken input before any request is sent; the
// server stays authoritative for everything else, and torrent files are
// never parsed here.

export type InputRoute =
  | { kind: "hex"; hex: string }
  | { kind: "magnet"; magnet: string }
  | { kind: "invalid"; reason: string };

const HEX40 = /^[0-9a-fA-F]{40}$/;
const BTIH = /^urn:btih:([0-9a-fA-F]{40}|[A-Za-z2-7]{32})$/;

export function classifyText(raw: string): InputRoute {
  const text = raw.trim();
  if (text === "") {
    return { kind: "invalid", reason: "paste an infohash or a magnet link first" };
  }
  if (HEX40.test(text)) {
    return { kind: "hex", hex: text.toLowerCase() };
  }
  if (text.toLowerCase().startsWith("magnet:")) {
    return classifyMagnet(text);
  }
  if (/^[0-9a-fA-F]+$/.test(text)) {
    return { kind: "invalid", reason: `an infohash has 40 hex characters, this has ${text.length}` };
  }
  return { kind: "invalid", reason: "that is neither a 40-character infohash nor a magnet link" };
}

function classifyMagnet(text: string): InputRoute {
  const query = text.slice(text.indexOf(":") + 1).replace(/^\?/, "");
  let params: URLSearchParams;
  try {
    params = new URLSearchParams(query);
  } catch {
    return { kind: "invalid", reason: "magnet link query string does not parse" };
  }
  const xts = params.getAll("xt").filter((xt) => xt.startsWith("urn:btih:"));
  if (xts.length === 0) {
    return { kind: "invalid", reason: "magnet link has no urn:btih exact topic" };
  }
  for (const xt of xts) {
    if (!BTIH.test(xt)) {
      return { kind: "invalid", reason: "magnet link infohash is not 40 hex or 32 base32 characters" };
    }
  }
  return { kind: "magnet", magnet: text };
}
