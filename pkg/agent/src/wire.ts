// Line-delimited wire records consumed by the evaluation pipeline's trace
// reader. One JSON object per line; `idx` is monotone over the whole stream,
// `seq` is generated at function entry and strictly increasing across enters.
// 64-bit values travel as decimal strings so no JSON reader loses precision.

export type RegisterSnapshot = Record<string, string>;

export interface MapsRecord {
    kind: "maps";
    regions: Array<[string, string]>;
}

export interface EnterRecord {
    kind: "enter";
    seq: number;
    tid: number;
    fn: string;
    regs: RegisterSnapshot;
    idx: number;
}

export interface ExitRecord {
    kind: "exit";
    seq: number;
    tid: number;
    fn: string;
    ret: string | null;
    idx: number;
}

export interface WriteRecord {
    kind: "write";
    seq: number;
    tid: number;
    fd: number;
    data_b64: string;
    idx: number;
}

export interface CorruptRecord {
    kind: "corrupt";
    reason: string;
    tid: number;
    idx: number;
}

export type WireRecord = MapsRecord | EnterRecord | ExitRecord | WriteRecord | CorruptRecord;

export function encodeRecord(record: WireRecord): string {
    return JSON.stringify(record);
}

const B64_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

// Hand-rolled so the agent has no dependency on Buffer (absent inside the
// instrumentation runtime).
export function base64Encode(data: Uint8Array): string {
    let out = "";
    for (let i = 0; i < data.length; i += 3) {
        const a = data[i];
        const b = i + 1 < data.length ? data[i + 1] : 0;
        const c = i + 2 < data.length ? data[i + 2] : 0;
        out += B64_ALPHABET[a >> 2];
        out += B64_ALPHABET[((a & 0x03) << 4) | (b >> 4)];
        out += i + 1 < data.length ? B64_ALPHABET[((b & 0x0f) << 2) | (c >> 6)] : "=";
        out += i + 2 < data.length ? B64_ALPHABET[c & 0x3f] : "=";
    }
    return out;
}
