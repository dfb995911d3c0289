// Binds the trace session to the instrumentation runtime: installs function
// hooks at base + offset, intercepts the write syscall for fd=1, and ships
// every event over the host-side message channel (never the target's stdout,
// which stays clean for observation parsing).

import { HookTable } from "./hooktable";
import { captureRegisters } from "./registers";
import { TraceSession } from "./session";

const RETURN_REGISTER: Record<string, string> = {
    arm64: "x0",
    x64: "rax",
    ia32: "eax",
    arm: "r0",
};

export interface AgentParameters {
    table: HookTable;
    moduleName?: string;
}

export function startAgent(params: AgentParameters): TraceSession {
    const session = new TraceSession((line) => send({ type: "trace-event", line }));
    const arch = Process.arch;

    const module = params.moduleName
        ? Module.findBaseAddress(params.moduleName)
        : Process.enumerateModules()[0].base;
    if (module === null || module === undefined) {
        throw new Error(`module base not found for ${params.moduleName ?? "<main>"}`);
    }

    // Mapped-region snapshot first: the reader needs it to categorize
    // pointer-range return values.
    session.emitMaps(
        Process.enumerateRanges("r--").map((range) => {
            const lo = BigInt(range.base.toString());
            return [lo.toString(10), (lo + BigInt(range.size)).toString(10)] as [string, string];
        })
    );

    for (const entry of params.table.entries) {
        const target = module.add(entry.offset.toString());
        const fn = entry.name;
        Interceptor.attach(target, {
            onEnter(this: InvocationContext) {
                session.onEnter(this.threadId, fn, captureRegisters(arch, this.context));
            },
            onLeave(this: InvocationContext, retval) {
                const raw = RETURN_REGISTER[arch]
                    ? BigInt(retval.toString()).toString(10)
                    : null;
                session.onExit(this.threadId, raw);
            },
        });
    }

    const writeImpl = Module.getExportByName(null, "write");
    Interceptor.attach(writeImpl, {
        onEnter(this: InvocationContext, args) {
            const fd = args[0].toInt32();
            if (fd !== 1) {
                return;
            }
            const length = args[2].toInt32();
            const buffer = length > 0 ? args[1].readByteArray(length) : null;
            const data = buffer !== null ? new Uint8Array(buffer) : new Uint8Array(0);
            session.onWrite(this.threadId, fd, data);
        },
    });

    return session;
}
