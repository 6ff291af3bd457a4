import { defineConfig } from "vitest/config";

export default defineConfig({
  build: {
    outDir: "dist",
    emptyOutDir: true,
  },
  server: {
    // during development, proxy API calls to a locally running `opencoding serve`
    proxy: Object.fromEntries(
      [
        "/codebooks",
        "/codes",
        "/annotations",
        "/disagreements",
        "/reconciliations",
        "/report",
        "/concept-groups",
        "/raters",
      ].map((path) => [path, "http://127.0.0.1:8765"]),
    ),
  },
  test: {
    include: ["src/**/*.test.ts", "tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
