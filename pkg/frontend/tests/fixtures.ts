/** Example payloads shaped like the annotation service's /api/next output,
 * with citation spans computed against the actual text. */

import { CitationSpan, NextPayload } from '../src/types.js';
import { StubExample } from './stub_server.js';

export function cite(
  text: string,
  snippet: string,
  key: string,
  fields: Partial<CitationSpan> = {},
): CitationSpan {
  const start = text.indexOf(snippet);
  if (start === -1) throw new Error(`snippet not found: ${snippet}`);
  const [volume, reporter, page] = key.split(' ');
  return {
    volume: Number(volume),
    reporter,
    first_page: Number(page),
    pincite: null,
    court_year: null,
    start,
    end: start + snippet.length,
    low_confidence: false,
    key,
    ...fields,
  };
}

const BANKR_GENERATION =
  'In Butner v. United States, 440 U.S. 48, 55, the Supreme Court emphasized that ' +
  'property rights in the assets of a bankrupt’s estate are determined by state law. ' +
  'Consistent with the principles outlined in 114 B.R. 326, the analysis is grounded in ' +
  'applicable nonbankruptcy state law. Furthermore, in alignment with 117 B.R. 15, the ' +
  'initiation of bankruptcy proceedings does not alter the creditor’s right to claim ' +
  'interest at the legal rate.';

const BANKR_TARGET =
  'See generally, Butner v. U.S., 440 U.S. 48; In re MacDonald, 114 B.R. 326; ' +
  'In re Milford Common J.V. Trust, 117 B.R. 15.';

const BANKR_PREVIOUS =
  'The matter pending before the Court is whether creditors are entitled to the payment ' +
  'of interest on Claim # 13, and the applicable interest rate.';

export function bankruptcyExample(): StubExample {
  return {
    payload: {
      record: {
        record_id: 'bankr-torres',
        model_name: 'gpt-4o',
        previous_text: BANKR_PREVIOUS,
        generation: BANKR_GENERATION,
        target: BANKR_TARGET,
        required_citations: ['440 U.S. 48', '114 B.R. 326', '117 B.R. 15'],
        references: [
          { cite_key: '440 U.S. 48', text: 'Property interests are created and defined by state law.' },
          { cite_key: '114 B.R. 326', text: 'It is necessary to look to nonbankruptcy law to determine the interest.' },
          { cite_key: '117 B.R. 15', text: 'Bankruptcy does not change the right to rents obtained pre-filing.' },
        ],
      },
      signals: {
        repeated_sentences: [],
        repeated_ngrams: [],
        structural_markers: [],
        word_count: 180,
        word_count_in_bounds: true,
      },
      coverage: { cited: ['440 U.S. 48', '114 B.R. 326', '117 B.R. 15'], missing: [], extra: [] },
      citations: {
        generation: [
          cite(BANKR_GENERATION, '440 U.S. 48, 55', '440 U.S. 48', { pincite: 55 }),
          cite(BANKR_GENERATION, '114 B.R. 326', '114 B.R. 326'),
          cite(BANKR_GENERATION, '117 B.R. 15', '117 B.R. 15'),
        ],
        target: [
          cite(BANKR_TARGET, '440 U.S. 48', '440 U.S. 48'),
          cite(BANKR_TARGET, '114 B.R. 326', '114 B.R. 326'),
          cite(BANKR_TARGET, '117 B.R. 15', '117 B.R. 15'),
        ],
        previous_text: [],
      },
    },
  };
}

const PLAIN_GENERATION =
  'Under 359 F.2d 292, the suggestion of death was ineffective to trigger the 90-day period.';

export function plainExample(recordId = 'rule25-rende'): StubExample {
  return {
    payload: {
      record: {
        record_id: recordId,
        model_name: 'llama-3-8b-instruct',
        previous_text: 'The District Court dismissed the action under Rule 25(a)(1).',
        generation: PLAIN_GENERATION,
        target: 'The amendment was intended to allow flexibility in substitution. 359 F.2d 292, 296.',
        required_citations: ['359 F.2d 292'],
        references: [],
      },
      signals: {
        repeated_sentences: [],
        repeated_ngrams: [],
        structural_markers: [],
        word_count: 16,
        word_count_in_bounds: false,
      },
      coverage: { cited: ['359 F.2d 292'], missing: [], extra: [] },
      citations: {
        generation: [cite(PLAIN_GENERATION, '359 F.2d 292', '359 F.2d 292')],
        target: [],
        previous_text: [],
      },
    },
  };
}
