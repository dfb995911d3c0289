// Minimal ambient surface of the dynamic-instrumentation runtime the agent
// binds to. Only the pieces the agent actually touches are declared.

declare interface NativePointerLike {
    add(offset: number | string): NativePointerLike;
    isNull(): boolean;
    toString(): string;
    toInt32(): number;
    readByteArray(length: number): ArrayBuffer | null;
}

declare interface CpuContext {
    [register: string]: any;
}

declare interface InvocationContext {
    threadId: number;
    context: CpuContext;
    returnAddress: NativePointerLike;
    [key: string]: any;
}

declare interface InvocationArgs {
    [index: number]: NativePointerLike;
}

declare interface RangeDetails {
    base: NativePointerLike;
    size: number;
    protection: string;
}

declare interface ModuleDetails {
    name: string;
    base: NativePointerLike;
    size: number;
    path: string;
}

declare const Process: {
    arch: string;
    getCurrentThreadId(): number;
    enumerateRanges(protection: string): RangeDetails[];
    enumerateModules(): ModuleDetails[];
};

declare const Module: {
    findBaseAddress(name: string): NativePointerLike | null;
    getExportByName(moduleName: string | null, exportName: string): NativePointerLike;
};

declare const Interceptor: {
    attach(
        target: NativePointerLike,
        callbacks: {
            onEnter?: (this: InvocationContext, args: InvocationArgs) => void;
            onLeave?: (this: InvocationContext, retval: NativePointerLike) => void;
        }
    ): unknown;
};

declare function send(message: unknown, data?: ArrayBuffer | null): void;

declare function recv(type: string, callback: (message: any) => void): { wait(): void };
