// Hook tables: text-segment function symbols and their offsets relative to
// the module base. Absolute hook address = base + offset. Stripped binaries
// carry no symbols, so a sidecar table generated from the matching unstripped
// build may stand in.

export interface HookEntry {
    name: string;
    offset: bigint;
}

export interface HookTable {
    entries: HookEntry[];
}

// nm lines look like "0000000000001169 T compute_sum"; T/t marks the text
// segment. Other symbol types (D, B, U, ...) never get hooks.
const NM_LINE = /^([0-9a-fA-F]+)\s+([A-Za-z])\s+(\S+)$/;

export function parseNmOutput(text: string): HookTable {
    const entries: HookEntry[] = [];
    for (const line of text.split("\n")) {
        const m = NM_LINE.exec(line.trim());
        if (!m) {
            continue;
        }
        const [, addr, type, name] = m;
        if (type === "T" || type === "t") {
            entries.push({ name, offset: BigInt("0x" + addr) });
        }
    }
    entries.sort((a, b) => (a.offset < b.offset ? -1 : a.offset > b.offset ? 1 : a.name < b.name ? -1 : 1));
    return { entries };
}

export interface SidecarSymbol {
    name: string;
    offset: string; // hex ("0x...") or decimal
}

export function parseSidecar(text: string): HookTable {
    const raw = JSON.parse(text) as { symbols: SidecarSymbol[] };
    const entries = raw.symbols.map((s) => ({ name: s.name, offset: BigInt(s.offset) }));
    entries.sort((a, b) => (a.offset < b.offset ? -1 : a.offset > b.offset ? 1 : a.name < b.name ? -1 : 1));
    return { entries };
}

export function loadOffsets(symbolDump: string, sidecar?: string): HookTable {
    const table = parseNmOutput(symbolDump);
    if (table.entries.length > 0) {
        return table;
    }
    if (sidecar !== undefined) {
        const fallback = parseSidecar(sidecar);
        if (fallback.entries.length > 0) {
            return fallback;
        }
    }
    throw new Error("no text-segment function symbols: binary is not instrumentable");
}
