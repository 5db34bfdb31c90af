#!/usr/bin/env python3
"""
Optimización de la disposición de un parque eólico por densidades (CLI)

Subcomandos:
    run <config.json>                      resolver y guardar artefactos
    evaluate <config.json> <layout.csv>    reevaluar un layout guardado
    compare <config.json> --solvers mma,ga comparar solvers
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List

from colorama import Fore, Style
from dotenv import load_dotenv
from tabulate import tabulate

# Añadir src al path
sys.path.append(str(Path(__file__).parent.parent))

from src.reporting.runner import EXIT_CONFIG, compare, evaluate, run

load_dotenv()

# Configurar logging
logging.basicConfig(
    level=getattr(logging, os.getenv('WFTO_LOG_LEVEL', 'INFO').upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def print_summary(title: str, rows: List[Dict]):
    """Tabla de resultados por solver"""
    print(f"\n{Style.BRIGHT}{title}{Style.RESET_ALL}")
    table = []
    for row in rows:
        status = f"{Fore.GREEN}OK{Style.RESET_ALL}" if row.get("feasible") else f"{Fore.RED}INFACTIBLE{Style.RESET_ALL}"
        table.append([
            row["solver"],
            row["turbine_count"],
            f"{row['aep_gwh']:.3f}" if row.get("aep_gwh") is not None else "-",
            row["iterations"],
            row["evaluations"],
            f"{row['wall_seconds']:.1f}",
            status,
        ])
    print(tabulate(table, headers=["Solver", "Turbinas", "AEP [GWh]", "Iteraciones", "Evaluaciones", "Tiempo [s]", "Estado"],
                   tablefmt="github"))


def print_aep(layout: str, value: float):
    print(f"{Fore.GREEN}AEP{Style.RESET_ALL} de {layout}: {value:.6f} GWh")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Optimización topológica de la disposición de aerogeneradores'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', help='Ejecutar una optimización desde un config JSON')
    run_parser.add_argument('config', type=str, help='Ruta al archivo de configuración')
    run_parser.add_argument(
        '--out',
        type=str,
        default=None,
        help='Carpeta de salida (por defecto la del config, bajo WFTO_OUTPUT_ROOT)'
    )
    run_parser.add_argument('--seed', type=int, default=None, help='Semilla aleatoria (sobrescribe el config)')
    run_parser.add_argument(
        '--dump-tensor',
        action='store_true',
        help='Guardar el tensor de déficits (un CSV por dirección) y neighbors.csv'
    )
    run_parser.add_argument(
        '--flow-direction',
        type=float,
        default=270.0,
        help='Dirección del viento (grados, desde donde sopla) para el mapa de velocidades'
    )

    eval_parser = subparsers.add_parser('evaluate', help='Reevaluar el AEP de un layout.csv')
    eval_parser.add_argument('config', type=str, help='Ruta al archivo de configuración')
    eval_parser.add_argument('layout', type=str, help='Ruta al layout.csv')

    compare_parser = subparsers.add_parser('compare', help='Comparar varios solvers en el mismo problema')
    compare_parser.add_argument('config', type=str, help='Ruta al archivo de configuración')
    compare_parser.add_argument(
        '--solvers',
        type=str,
        default='mma,ga',
        help='Lista separada por comas (mma, ga, brute)'
    )
    compare_parser.add_argument('--out', type=str, default=None, help='Carpeta de salida')
    compare_parser.add_argument('--seed', type=int, default=None, help='Semilla aleatoria')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == 'run':
        return run(args.config, out=args.out, seed=args.seed,
                   dump_tensor=args.dump_tensor, flow_direction=args.flow_direction, report=print_summary)
    if args.command == 'evaluate':
        return evaluate(args.config, args.layout, report=print_aep)
    if args.command == 'compare':
        solvers = [s.strip().lower() for s in args.solvers.split(',') if s.strip()]
        unknown = [s for s in solvers if s not in ('mma', 'ga', 'brute')]
        if not solvers or unknown:
            logger.error(f"❌ Solvers no válidos: {unknown or args.solvers}")
            return EXIT_CONFIG
        return compare(args.config, solvers=solvers, out=args.out, seed=args.seed, report=print_summary)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
