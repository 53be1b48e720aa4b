"""blastFoam case emission.

Solver settings and the C-4 phase properties are written as fixed text; this
package never evaluates them.
"""
from __future__ import annotations

import math
from pathlib import Path

from ..scene import GridSpec, Scenario
from .probes import probe_locations

DELTA_T = "1e-07"
END_TIME = "7.5e-06"
SOLVER_TOLERANCE = "1e-06"
N_PROCS = 8
C4_DENSITY = 1601.0

HEADER = """/*--------------------------------*- C++ -*----------------------------------*\\
  blastFoam case generated from scenario seed {seed}
\\*---------------------------------------------------------------------------*/
FoamFile
{{
    version     2.0;
    format      ascii;
    class       dictionary;
    object      {obj};
}}
"""

PHASE_PROPERTIES = """phases (c4 air);

c4
{
    type detonating;
    reactants
    {
        thermoType
        {
            transport   const;
            thermo      eConst;
            equationOfState Murnaghan;
        }
        equationOfState
        {
            rho0        1601;
            K0          0;
            Gamma       0.25;
            pRef        101298;
        }
        specie
        {
            molWeight   55.0;
        }
        transport
        {
            mu          0;
            Pr          1;
        }
        thermodynamics
        {
            Cv          1400;
            Hf          0.0;
        }
    }
    products
    {
        thermoType
        {
            transport   const;
            thermo      eConst;
            equationOfState JWL;
        }
        equationOfState
        {
            rho0        1601;
            A           609.77e9;
            B           12.95e9;
            R1          4.5;
            R2          1.4;
            omega       0.25;
        }
        specie
        {
            molWeight   55.0;
        }
        transport
        {
            mu          0;
            Pr          1;
        }
        thermodynamics
        {
            Cv          1400;
            Hf          0.0;
        }
    }
    activationModel linear;
    initiation
    {
        E0          9.0e9;
        vDet        7850;
    }
    residualRho     1e-6;
    residualAlpha   1e-10;
}
"""


def _num(v: float) -> str:
    return format(float(v), ".10g")


def charge_radius(mass: float) -> float:
    return (3.0 * mass / (4.0 * math.pi * C4_DENSITY)) ** (1.0 / 3.0)


def control_dict(s: Scenario, g: GridSpec) -> str:
    locs = "\n".join(f"            ({_num(x)} {_num(y)} {_num(z)})" for x, y, z in probe_locations(g))
    return HEADER.format(seed=s.seed, obj="controlDict") + f"""
application     blastFoam;
startFrom       startTime;
startTime       0;
stopAt          endTime;
endTime         {END_TIME};
deltaT          {DELTA_T};
writeControl    adjustableRunTime;
writeInterval   {END_TIME};
adjustTimeStep  no;

functions
{{
    probes
    {{
        type            probes;
        libs            ("libsampling.so");
        writeControl    timeStep;
        fields          (p);
        probeLocations
        (
{locs}
        );
    }}
}}
"""


def fv_solution(s: Scenario) -> str:
    return HEADER.format(seed=s.seed, obj="fvSolution") + f"""
solvers
{{
    "(rho|rhoU|rhoE|alpha.*)"
    {{
        solver          diagonal;
    }}
    "(U|e).*"
    {{
        solver          PBiCGStab;
        preconditioner  DIC;
        tolerance       {SOLVER_TOLERANCE};
        relTol          0;
    }}
}}
"""


def fv_schemes(s: Scenario) -> str:
    return HEADER.format(seed=s.seed, obj="fvSchemes") + """
fluxScheme      HLLC;
ddtSchemes      { default Euler; }
gradSchemes     { default leastSquares; }
divSchemes      { default none; div(alphaRhoPhi.c4,lambda.c4) Riemann; }
laplacianSchemes { default Gauss linear corrected; }
interpolationSchemes
{
    default             linear;
    reconstruct(alpha)  vanAlbada;
    reconstruct(rho)    vanAlbada;
    reconstruct(U)      vanAlbadaV;
    reconstruct(e)      vanAlbada;
    reconstruct(p)      vanAlbada;
    reconstruct(speedOfSound) vanAlbada;
}
snGradSchemes   { default corrected; }
"""


def block_mesh_dict(s: Scenario) -> str:
    return HEADER.format(seed=s.seed, obj="blockMeshDict") + """
convertToMeters 1;
vertices
(
    (-5 -5 -5) (5 -5 -5) (5 5 -5) (-5 5 -5)
    (-5 -5 5) (5 -5 5) (5 5 5) (-5 5 5)
);
blocks ( hex (0 1 2 3 4 5 6 7) (25 25 10) simpleGrading (1 1 1) );
"""


def snappy_geometry(s: Scenario) -> str:
    boxes = []
    for k, o in enumerate(s.obstacles, start=1):
        boxes.append(f"""    obstacle{k}
    {{
        type    searchableBox;
        min     ({_num(o.x_min)} {_num(o.y_min)} {_num(o.z_min)});
        max     ({_num(o.x_max)} {_num(o.y_max)} {_num(o.z_max)});
    }}""")
    return HEADER.format(seed=s.seed, obj="snappyHexMeshDict") + "\ngeometry\n{\n" + "\n".join(boxes) + "\n}\n"


def set_fields_dict(s: Scenario) -> str:
    r = charge_radius(s.charge.mass)
    c = s.charge
    return HEADER.format(seed=s.seed, obj="setFieldsDict") + f"""
defaultFieldValues ( volScalarFieldValue alpha.c4 0 );
regions
(
    sphereToCell
    {{
        centre ({_num(c.x)} {_num(c.y)} {_num(r)});
        radius {_num(r)};
        fieldValues ( volScalarFieldValue alpha.c4 1 );
    }}
);
"""


def decompose_par_dict(s: Scenario) -> str:
    return HEADER.format(seed=s.seed, obj="decomposeParDict") + f"""
numberOfSubdomains {N_PROCS};
method          scotch;
"""


def emit_case(s: Scenario, directory, g: GridSpec | None = None) -> Path:
    """Write a solver-ready case skeleton for ``s`` into ``directory``."""
    g = g or GridSpec()
    root = Path(directory)
    files = {
        "scenario.json": s.to_json() + "\n",
        "system/controlDict": control_dict(s, g),
        "system/fvSolution": fv_solution(s),
        "system/fvSchemes": fv_schemes(s),
        "system/blockMeshDict": block_mesh_dict(s),
        "system/snappyHexMeshDict": snappy_geometry(s),
        "system/setFieldsDict": set_fields_dict(s),
        "system/decomposeParDict": decompose_par_dict(s),
        "constant/phaseProperties": HEADER.format(seed=s.seed, obj="phaseProperties") + PHASE_PROPERTIES,
    }
    for rel, text in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return root
