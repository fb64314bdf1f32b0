export interface Manifest {
  id: string;
  name: string;
  src_lang: string;
  trg_lang: string;
  version: string;
}

export interface CatalogEntry {
  id: string;
  name: string;
  src_lang: string;
  trg_lang: string;
  version: string;
  url: string;
  sha256: string;
  size_bytes: number;
}

export interface Settings {
  bind: string;
  port: number;
  data_dir: string | null;
  threads: number;
  max_batch_tokens: number;
  as_you_type_enabled: boolean;
  catalog_url: string | null;
}

export type TranslateOutcome =
  | { kind: "ok"; text: string }
  | { kind: "superseded" }
  | { kind: "error"; code: string; message: string };
