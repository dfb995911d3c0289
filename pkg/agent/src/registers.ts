// Register supersets captured at function entry, per architecture. The
// superset goes beyond the calling convention's argument registers so that
// values passed through non-canonical registers remain visible downstream.

export const REGISTER_SUPERSET: Record<string, string[]> = {
    arm64: ["x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7", "sp", "lr"],
    x64: ["rdi", "rsi", "rdx", "rcx", "r8", "r9", "rax", "rsp"],
    ia32: ["eax", "ecx", "edx", "ebx", "esp"],
    arm: ["r0", "r1", "r2", "r3", "sp", "lr"],
};

export interface CpuContextLike {
    [register: string]: { toString(): string } | undefined;
}

export function captureRegisters(arch: string, context: CpuContextLike): Record<string, string> {
    const names = REGISTER_SUPERSET[arch] ?? [];
    const out: Record<string, string> = {};
    for (const name of names) {
        const value = context[name];
        if (value !== undefined) {
            out[name] = BigInt(value.toString()).toString(10);
        }
    }
    return out;
}
