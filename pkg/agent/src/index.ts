// Injection entry point. The controller sends one message carrying the
// symbol dump of the target (nm output) and, for stripped binaries, the
// sidecar offset table generated from the matching unstripped build.

import { startAgent } from "./agent";
import { loadOffsets } from "./hooktable";

recv("configure", (message: { payload: { nm: string; sidecar?: string; module?: string } }) => {
    const { nm, sidecar, module } = message.payload;
    const table = loadOffsets(nm, sidecar);
    startAgent({ table, moduleName: module });
    send({ type: "ready", hooks: table.entries.length });
}).wait();
