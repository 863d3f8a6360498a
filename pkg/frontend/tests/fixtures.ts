/**
 * Canned API payloads and a fetch stub for tests. The shapes mirror what the
 * assistant's /v1 endpoints return; no test ever touches a real network.
 */

import type {
  HealthInfo,
  QueryResponse,
  RetrieverInfo,
  RoleInfo,
} from "../src/api.js";

export const ROLES: RoleInfo[] = [
  {
    role: "Consumer",
    background: {
      knowledge: "Basic understanding of IoT devices.",
      goals: "Decide whether a device is safe to use at home.",
      requirements: "Plain language, no jargon.",
    },
    actions: ["check device safety"],
    example_queries: ["Is it secure to use Signify Smart Lighting in home?"],
  },
  {
    role: "SecurityAnalyst",
    background: {
      knowledge: "Deep familiarity with vulnerabilities and exploits.",
      goals: "Assess and mitigate device risk.",
      requirements: "Precise technical detail with references.",
    },
    actions: ["assess risk"],
    example_queries: ["Conduct a security assessment for TP-Link AX6000 Wi-Fi 6 Router."],
  },
  {
    role: "TechnicalOfficer",
    background: {
      knowledge: "Procurement and compliance context.",
      goals: "Verify certification status of fleet devices.",
      requirements: "Labelling scheme levels and coverage.",
    },
    actions: ["check labels"],
    example_queries: ["Check the security labeling of the company's WiFi Routers."],
  },
  {
    role: "Developer",
    background: {
      knowledge: "Firmware and product engineering.",
      goals: "Harden upcoming products.",
      requirements: "Actionable engineering guidance.",
    },
    actions: ["plan mitigations"],
    example_queries: ["Develop a security enhancement roadmap for the next generation of routers."],
  },
  {
    role: "Trainer",
    background: {
      knowledge: "Security education practice.",
      goals: "Teach safe IoT usage.",
      requirements: "Clear examples suitable for teaching.",
    },
    actions: ["prepare material"],
    example_queries: ["Prepare a guide on the importance of cybersecurity labeling for smart locks."],
  },
];

export const RETRIEVERS: RetrieverInfo[] = [
  {
    dataset_id: "variot_vulnerabilities",
    display_name: "VARIoT Vulnerabilities",
    description: "IoT vulnerability records.",
    retrieval_mode: "semantic",
    chunking: { splitter: "RecursiveCharacter", size: 500, overlap: 100 },
    chunks: 42,
  },
  {
    dataset_id: "variot_exploits",
    display_name: "VARIoT Exploits",
    description: "IoT exploit records.",
    retrieval_mode: "semantic",
    chunking: { splitter: "TokenText", size: 1000, overlap: 150 },
    chunks: 17,
  },
  {
    dataset_id: "mitre_attack_ics",
    display_name: "MITRE ATT&CK for ICS",
    description: "Adversary techniques against industrial systems.",
    retrieval_mode: "semantic",
    chunking: { splitter: "Character", size: 1000, overlap: 200 },
    chunks: 65,
  },
  {
    dataset_id: "threat_reports",
    display_name: "Threat Reports",
    description: "Narrative threat intelligence reports.",
    retrieval_mode: "semantic",
    chunking: { splitter: "TokenText", size: 500, overlap: 200 },
    chunks: 12,
  },
  {
    dataset_id: "cls",
    display_name: "Cybersecurity Labelling Scheme",
    description: "Certification entries for consumer IoT devices.",
    retrieval_mode: "metadata_only",
    chunking: { splitter: "RecursiveCharacter", size: 500, overlap: 100 },
    chunks: 30,
  },
];

export const HEALTH: HealthInfo = {
  status: "ok",
  retrievers: 5,
  roles: 5,
  datasets: RETRIEVERS.map((r) => r.dataset_id),
};

const NULL_SLOT = { activated: false, hits: null, trace: null, error: null };

/** Selector decisions (true, false, true, false, true) over the five datasets. */
export function queryResponseFor(role: string, query: string): QueryResponse {
  return {
    text: "The **DCS-942L** stream is exposed; enable authentication and update the firmware.",
    role,
    query,
    selector: {
      decisions: [true, false, true, false, true],
      raw_output: '{"S1": true, "S2": false, "S3": true, "S4": false, "S5": true}',
      warning: false,
    },
    evidence: [
      {
        dataset_id: "variot_vulnerabilities",
        display_name: "VARIoT Vulnerabilities",
        activated: true,
        hits: [
          {
            chunk: {
              chunk_id: "variot_vulnerabilities/VAR-202301-0001#0",
              doc_id: "variot_vulnerabilities/VAR-202301-0001",
              dataset_id: "variot_vulnerabilities",
              seq_no: 0,
              text: "Unauthenticated RTSP stream exposure in D-Link DCS-942L cameras.",
              char_span: [0, 63],
              metadata: { id: "VAR-202301-0001", products: ["dcs-942l"], "cvss-score": 7.5 },
            },
            score: 0.913,
          },
          {
            chunk: {
              chunk_id: "variot_vulnerabilities/VAR-202301-0002#1",
              doc_id: "variot_vulnerabilities/VAR-202301-0002",
              dataset_id: "variot_vulnerabilities",
              seq_no: 1,
              text: "Hard-coded credentials in DCS-942 series firmware before 2.11.",
              char_span: [120, 182],
              metadata: { id: "VAR-202301-0002", products: ["dcs-942", "dcs-942l"] },
            },
            score: 0.847,
          },
        ],
        trace: {
          dataset_id: "variot_vulnerabilities",
          mode: "semantic",
          used_constructor: true,
          raw_output: '{"query": "dcs-942 stream", "filter": "contain(\\"products\\", \\"dcs-942\\")"}',
          internal_query: null,
          structured_query: {
            query_text: "dcs-942 stream",
            filter_text: 'contain("products", "dcs-942")',
            k: 4,
          },
          fallback: false,
        },
        error: null,
      },
      { dataset_id: "variot_exploits", display_name: "VARIoT Exploits", ...NULL_SLOT },
      {
        dataset_id: "mitre_attack_ics",
        display_name: "MITRE ATT&CK for ICS",
        activated: true,
        hits: [
          {
            chunk: {
              chunk_id: "mitre_attack_ics/T0886#0",
              doc_id: "mitre_attack_ics/T0886",
              dataset_id: "mitre_attack_ics",
              seq_no: 0,
              text: "Remote Services: adversaries leverage exposed services for initial access.",
              char_span: [0, 74],
              metadata: { id: "T0886", name: "Remote Services" },
            },
            score: 0.512,
          },
        ],
        trace: {
          dataset_id: "mitre_attack_ics",
          mode: "semantic",
          used_constructor: true,
          raw_output: "not parseable",
          internal_query: null,
          structured_query: null,
          fallback: true,
        },
        error: null,
      },
      { dataset_id: "threat_reports", display_name: "Threat Reports", ...NULL_SLOT },
      {
        dataset_id: "cls",
        display_name: "Cybersecurity Labelling Scheme",
        activated: true,
        hits: [
          {
            chunk: {
              chunk_id: "cls/CLS-0042#0",
              doc_id: "cls/CLS-0042",
              dataset_id: "cls",
              seq_no: 0,
              text: "id: CLS-0042\nproduct: DCS-942L\nlevel: 2",
              char_span: [0, 39],
              metadata: { id: "CLS-0042", product: "DCS-942L", manufacturer: "D-Link", level: 2 },
            },
            score: null,
          },
        ],
        trace: {
          dataset_id: "cls",
          mode: "metadata_only",
          used_constructor: true,
          raw_output: '{"query": "dcs-942l label", "filter": "contain(\\"product\\", \\"dcs-942\\")"}',
          internal_query: {
            query_text: "dcs-942l label",
            filter_text: 'contain("product", "dcs-942")',
            limit: 4,
          },
          structured_query: null,
          fallback: false,
        },
        error: null,
      },
    ],
  };
}

export interface RecordedCall {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: unknown;
}

type Handler = (body: unknown) => Response | Promise<Response>;

export function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Fetch stub serving the /v1 routes; individual routes can be overridden. */
export function apiStub(overrides: Partial<Record<string, Handler>> = {}): {
  fetchFn: typeof fetch;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const routes: Record<string, Handler> = {
    "GET /v1/health": () => json(HEALTH),
    "GET /v1/roles": () => json({ roles: ROLES }),
    "GET /v1/retrievers": () => json({ retrievers: RETRIEVERS }),
    "POST /v1/query": (body) => {
      const req = body as { role: string; query: string };
      return json(queryResponseFor(req.role, req.query));
    },
    ...overrides,
  };
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body === undefined ? undefined : JSON.parse(String(init.body));
    calls.push({ url, method, headers: { ...(init?.headers as Record<string, string>) }, body });
    const handler = routes[`${method} ${path}`];
    if (!handler) {
      return json({ detail: `no route for ${method} ${path}` }, 404);
    }
    return handler(body);
  }) as typeof fetch;
  return { fetchFn, calls };
}
