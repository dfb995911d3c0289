// Thread-local call-stack tracking and event emission. Each function entry
// takes a fresh globally unique sequence id and pushes its frame; the exit
// pops it, so writes always attribute to the innermost live call of their
// thread. A pop on an empty stack emits a corruption marker instead of
// throwing into the target process.

import {
    base64Encode,
    encodeRecord,
    RegisterSnapshot,
    WireRecord,
} from "./wire";

interface Frame {
    seq: number;
    fn: string;
}

export type Sink = (line: string) => void;

export class TraceSession {
    private nextSeq = 1;
    private nextIdx = 1;
    private stacks = new Map<number, Frame[]>();
    private corruptions = 0;

    constructor(private readonly sink: Sink) {}

    private emit(record: WireRecord): void {
        this.sink(encodeRecord(record));
    }

    private stack(tid: number): Frame[] {
        let frames = this.stacks.get(tid);
        if (frames === undefined) {
            frames = [];
            this.stacks.set(tid, frames);
        }
        return frames;
    }

    emitMaps(regions: Array<[string, string]>): void {
        this.emit({ kind: "maps", regions });
    }

    onEnter(tid: number, fn: string, regs: RegisterSnapshot): number {
        const seq = this.nextSeq++;
        this.stack(tid).push({ seq, fn });
        this.emit({ kind: "enter", seq, tid, fn, regs, idx: this.nextIdx++ });
        return seq;
    }

    onExit(tid: number, ret: string | null): void {
        const frames = this.stack(tid);
        const frame = frames.pop();
        if (frame === undefined) {
            this.corruptions++;
            this.emit({
                kind: "corrupt",
                reason: "exit with empty call stack",
                tid,
                idx: this.nextIdx++,
            });
            return;
        }
        this.emit({ kind: "exit", seq: frame.seq, tid, fn: frame.fn, ret, idx: this.nextIdx++ });
    }

    onWrite(tid: number, fd: number, data: Uint8Array): void {
        if (fd !== 1) {
            return; // only stdout is observed
        }
        const frames = this.stack(tid);
        const top = frames.length > 0 ? frames[frames.length - 1].seq : -1;
        this.emit({
            kind: "write",
            seq: top,
            tid,
            fd,
            data_b64: base64Encode(data),
            idx: this.nextIdx++,
        });
    }

    corruptionCount(): number {
        return this.corruptions;
    }

    openFrames(tid: number): number {
        return this.stack(tid).length;
    }
}
